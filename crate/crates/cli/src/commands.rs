//! One function per subcommand. Each returns the JSON report and the files to
//! write; nothing touches the disk until the whole computation succeeded.

use khessian::bifurcation::{count_solutions, estimate_lambda_star, intersection_number, sweep_with, Reference, Shooter};
use khessian::params::{lambda_star_lower_bound, serialize_extended, ProblemParams, RegimeClass};
use khessian::phase::{critical_points, integrate_orbit, Limit};
use khessian::radial::{integral_residual, maximal_solution, solve_ivp, IvpOptions, MaximalStatus, WeightKind};
use khessian::singular::{lambda_tilde, singular_profile_with, DEFAULT_T0};
use khessian::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub struct Report {
    pub json: Value,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Report {
    fn print_only(json: Value) -> Self {
        Self { json, files: Vec::new() }
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn json_bytes(v: &Value) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

#[derive(Serialize)]
struct Exponents {
    n: u32,
    k: u32,
    q: f64,
    mu: f64,
    sigma: f64,
    c_nk: f64,
    q_star: f64,
    #[serde(serialize_with = "serialize_extended")]
    q_jl: f64,
    regime: RegimeClass,
    bound: f64,
}

pub fn exponents(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let r = p.regime();
    let e = Exponents {
        n: p.n,
        k: p.k,
        q: p.q,
        mu: p.mu,
        sigma: p.sigma(),
        c_nk: p.c_nk(),
        q_star: r.q_star,
        q_jl: r.q_jl,
        regime: r.class,
        bound: lambda_star_lower_bound(&p),
    };
    Ok(Report::print_only(to_value(&e)?))
}

fn require_supercritical(p: &ProblemParams, what: &str) -> Result<()> {
    if p.q <= p.q_star() || p.regime().class == RegimeClass::Critical {
        return Err(Error::Regime(format!("{what} needs q > q* = {}, got q = {}", p.q_star(), p.q)));
    }
    Ok(())
}

pub fn singular(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    require_supercritical(&p, "the singular solution")?;
    let t0 = cfg.t0.unwrap_or(DEFAULT_T0);
    let s = singular_profile_with(&p, cfg.r_min, cfg.tol, t0, false)?;
    let w1 = *s.profile.w.last().expect("non-empty profile");
    let report = json!({
        "config": to_value(cfg)?,
        "lambda_tilde": s.lambda_tilde,
        "t0": s.t0,
        "w1": w1,
        "asymptotic_constant": s.asymptotic_constant(),
        "x0": s.trajectory.states[0].x,
        "y0": s.trajectory.states[0].y,
    });
    let mut csv = Vec::new();
    s.profile.write_csv(&mut csv)?;
    Ok(Report { files: vec![("singular.json".into(), json_bytes(&report)?), ("singular.csv".into(), csv)], json: report })
}

fn shooter(cfg: &RunConfig, p: &ProblemParams) -> Result<Shooter> {
    match p.regime().class {
        RegimeClass::BelowCritical | RegimeClass::Critical => {
            let l = cfg.lambda.ok_or_else(|| Error::Parameter("below q* the sweep needs --lambda as reference load".into()))?;
            Shooter::with_reference(p, l, Reference::Supplied, cfg.tol)
        }
        _ => Shooter::new(p, cfg.tol),
    }
}

pub fn sweep(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let curve = sweep_with(shooter(cfg, &p)?, cfg.alpha_min, cfg.alpha_max, cfg.samples)?;
    let estimate = if curve.samples.is_empty() { Value::Null } else { to_value(&estimate_lambda_star(&curve)?)? };
    let report = json!({
        "config": to_value(cfg)?,
        "lambda_ref": curve.lambda_ref,
        "reference": to_value(&curve.reference)?,
        "crossings": curve.crossings,
        "uncertain_crossings": curve.uncertain_crossings,
        "extrema": to_value(&curve.extrema)?,
        "early_stops": to_value(&curve.early_stops)?,
        "noise_floor": curve.noise_floor,
        "lambda_star_estimate": estimate,
    });
    let mut csv = Vec::new();
    curve.write_csv(&mut csv)?;
    Ok(Report { files: vec![("sweep.json".into(), json_bytes(&report)?), ("sweep.csv".into(), csv)], json: report })
}

/// `--lambda`, or `--lambda-frac` times `lambda_tilde`.
fn target_load(cfg: &RunConfig, p: &ProblemParams) -> Result<f64> {
    match (cfg.lambda, cfg.lambda_frac) {
        (Some(l), _) => Ok(l),
        (None, Some(f)) => {
            require_supercritical(p, "--lambda-frac")?;
            Ok(f * lambda_tilde(p, cfg.tol.min(1e-12))?)
        }
        (None, None) => Err(Error::Parameter("give --lambda or --lambda-frac".into())),
    }
}

pub fn count(cfg: &RunConfig) -> Result<Report> {
    let base = cfg.params()?;
    let lambda = target_load(cfg, &base)?;
    let shooter = match base.regime().class {
        RegimeClass::BelowCritical | RegimeClass::Critical => Shooter::with_reference(&base, lambda, Reference::Supplied, cfg.tol)?,
        _ => Shooter::new(&base, cfg.tol)?,
    };
    let curve = sweep_with(shooter, cfg.alpha_min, cfg.alpha_max, cfg.samples)?;
    let c = count_solutions(&base, lambda, &curve)?;
    Ok(Report::print_only(json!({
        "config": to_value(cfg)?,
        "lambda": lambda,
        "lambda_ref": curve.lambda_ref,
        "count": c.count(),
        "roots": to_value(&c.roots)?,
        "uncertain": to_value(&c.uncertain)?,
    })))
}

pub fn intersect(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    require_supercritical(&p, "the intersection count")?;
    let s = singular_profile_with(&p, cfg.r_min, cfg.tol, cfg.t0.unwrap_or(DEFAULT_T0), false)?;
    let shooter = Shooter::with_reference(&p, s.lambda_tilde, Reference::LambdaTilde, cfg.tol)?;
    let regular = shooter.solve(cfg.alpha)?;
    let z = intersection_number(&s, &regular, cfg.r_min, 1.0, cfg.zero_tol)?;
    Ok(Report::print_only(json!({
        "config": to_value(cfg)?,
        "alpha": cfg.alpha,
        "lambda_tilde": s.lambda_tilde,
        "interval": [cfg.r_min, 1.0],
        "count": z.count,
        "zeros": z.zeros,
        "tangencies": z.tangencies,
    })))
}

pub fn phase(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let t0 = cfg.t0.unwrap_or(-12.0);
    let (x0, y0, source) = match (cfg.x0, cfg.y0) {
        (Some(x), Some(y)) => (x, y, "given"),
        (None, None) => {
            let lambda = match cfg.lambda {
                Some(l) => l,
                None => {
                    require_supercritical(&p, "the default load of the phase command")?;
                    lambda_tilde(&p, cfg.tol.min(1e-12))?
                }
            };
            let wk = WeightKind::matukuma(p.mu);
            let sol = solve_ivp(&p.with_lambda(lambda)?, wk, cfg.alpha, t0.exp(), cfg.tol, &IvpOptions::default())?;
            let (x, y) = sol.phase(t0).ok_or_else(|| Error::Domain(format!("regular orbit undefined at t = {t0}")))?;
            (x, y, "regular")
        }
        _ => return Err(Error::Parameter("give both --x0 and --y0 or neither".into())),
    };
    let orbit = integrate_orbit(&p, t0, x0, y0, cfg.t1, cfg.tol)?;
    let report = json!({
        "config": to_value(cfg)?,
        "start": { "t": t0, "x": x0, "y": y0, "source": source },
        "blew_up": orbit.blew_up(),
        "events": orbit.events_json(),
        "critical_points": {
            "minus": to_value(&critical_points(&p, Limit::Minus))?,
            "plus": to_value(&critical_points(&p, Limit::Plus))?,
        },
    });
    let mut csv = Vec::new();
    orbit.write_csv(&mut csv)?;
    Ok(Report { files: vec![("phase.json".into(), json_bytes(&report)?), ("phase.csv".into(), csv)], json: report })
}

pub fn maximal(cfg: &RunConfig) -> Result<Report> {
    let base = cfg.params()?;
    let lambda = target_load(cfg, &base)?;
    let p = base.with_lambda(lambda)?;
    let m = maximal_solution(&p, cfg.tol, cfg.iter_cap)?;
    let prof = match (m.status, &m.profile) {
        (MaximalStatus::Converged, Some(prof)) => prof,
        (status, _) => {
            return Err(Error::Oracle(format!(
                "monotone iteration {} after {} steps (sup |u| = {:e}, last change {:e})",
                serde_json::to_value(status)?.as_str().unwrap_or("failed"),
                m.iterations,
                m.sup_norm,
                m.last_change
            )))
        }
    };
    let residual = integral_residual(prof, &p, WeightKind::matukuma(p.mu))?;
    let report = json!({
        "config": to_value(cfg)?,
        "lambda": lambda,
        "status": to_value(&m.status)?,
        "iterations": m.iterations,
        "last_change": m.last_change,
        "sup_norm": m.sup_norm,
        "u0": m.u[0],
        "residual": residual,
    });
    let mut csv = Vec::new();
    prof.write_csv(&mut csv)?;
    Ok(Report { files: vec![("maximal.json".into(), json_bytes(&report)?), ("maximal.csv".into(), csv)], json: report })
}
