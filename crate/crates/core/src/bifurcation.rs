//! The bifurcation map `Lambda(alpha) = lambda_ref (-w(1, alpha))^(q-k)`.
//!
//! Regular profiles `w(., alpha)` are computed once with the reference load
//! `lambda_ref` (the singular value `lambda_tilde` when it exists). A root of
//! `Lambda(alpha) = lambda` gives the solution
//! `u = 1 + (lambda_ref / lambda)^(1/(q-k)) w(., alpha)` of the Dirichlet problem.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{ProblemParams, RegimeClass};
use crate::radial::{fmt_f64, integral_residual, log_grid, solve_ivp, IvpOptions, IvpSolution, RadialCurve, RadialProfile, WeightKind};
use crate::singular::lambda_tilde;

/// Relative resolution in `alpha` of crossings and roots.
pub const ALPHA_RESOLUTION: f64 = 1e-8;
/// Extrema closer than this (relative) to the target load are tangential.
pub const TANGENCY_REL: f64 = 1e-8;
/// Acceptance thresholds for a root's solution.
pub const ROOT_RESIDUAL: f64 = 1e-6;
pub const ROOT_BOUNDARY: f64 = 1e-6;
/// Departures of `Lambda` from `lambda_ref` below `NOISE_FACTOR * tol` (relative) are not resolved.
pub const NOISE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// `lambda_tilde` of the singular solution.
    LambdaTilde,
    /// The load supplied with the parameters (no singular solution below `q*`).
    Supplied,
}

/// Shooting from the origin with a fixed reference load.
#[derive(Debug, Clone)]
pub struct Shooter {
    pub params: ProblemParams,
    pub lambda_ref: f64,
    pub reference: Reference,
    pub tol: f64,
    pub weight: WeightKind,
}

impl Shooter {
    pub fn new(p: &ProblemParams, tol: f64) -> Result<Self> {
        let (lambda_ref, reference) = match p.regime().class {
            RegimeClass::BelowCritical | RegimeClass::Critical => (p.lambda.unwrap_or(1.0), Reference::Supplied),
            _ => (lambda_tilde(p, tol.min(1e-12))?, Reference::LambdaTilde),
        };
        Self::with_reference(p, lambda_ref, reference, tol)
    }

    pub fn with_reference(p: &ProblemParams, lambda_ref: f64, reference: Reference, tol: f64) -> Result<Self> {
        let params = p.with_lambda(lambda_ref)?;
        params.lambda()?;
        Ok(Self { params, lambda_ref, reference, tol, weight: WeightKind::matukuma(p.mu) })
    }

    pub fn solve(&self, alpha: f64) -> Result<IvpSolution> {
        solve_ivp(&self.params, self.weight, alpha, 1.0, self.tol, &IvpOptions::default())
    }

    /// `w(1, alpha)`.
    pub fn endpoint(&self, alpha: f64) -> Result<f64> {
        Ok(self.solve(alpha)?.endpoint().0)
    }

    pub fn lambda_of_w1(&self, w1: f64) -> f64 {
        self.lambda_ref * (-w1).powf(self.params.q - self.params.kf())
    }

    /// `Lambda(alpha)`.
    pub fn lambda_map(&self, alpha: f64) -> Result<f64> {
        Ok(self.lambda_of_w1(self.endpoint(alpha)?))
    }

    /// Solution of the Dirichlet problem with load `lambda` from the profile at `alpha`,
    /// in the shifted form `w = u - 1`.
    pub fn solution_profile(&self, alpha: f64, lambda: f64) -> Result<RadialProfile> {
        let scale = (self.lambda_ref / lambda).powf(1.0 / (self.params.q - self.params.kf()));
        let base = self.solve(alpha)?.profile(IvpOptions::default().max_dt);
        RadialProfile::new(
            base.rs.clone(),
            base.w.iter().map(|w| scale * w).collect(),
            base.dw.iter().map(|d| scale * d).collect(),
            scale * alpha,
            lambda,
            self.weight,
            self.tol,
        )
    }
}

/// `w(1, alpha)` under the Matukuma weight with load `lambda_tilde`.
pub fn shoot_endpoint(p: &ProblemParams, alpha: f64, tol: f64) -> Result<f64> {
    Shooter::new(p, tol)?.endpoint(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub alpha: f64,
    pub w1: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub alpha: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub kind: ExtremumKind,
}

/// A sample whose profile reached zero before `r = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EarlyStop {
    pub alpha: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationCurve {
    pub samples: Vec<Sample>,
    pub extrema: Vec<Extremum>,
    /// `alpha` values where `Lambda = lambda_ref`, between lobes that rise above `noise_floor`.
    pub crossings: Vec<f64>,
    /// Sign changes of `Lambda - lambda_ref` next to a lobe lost in the shooting error.
    pub uncertain_crossings: Vec<f64>,
    /// `NOISE_FACTOR * tol * lambda_ref`.
    pub noise_floor: f64,
    pub early_stops: Vec<EarlyStop>,
    pub lambda_ref: f64,
    pub reference: Reference,
    pub tol: f64,
    #[serde(skip)]
    shooter: Shooter,
}

impl BifurcationCurve {
    pub fn shooter(&self) -> &Shooter {
        &self.shooter
    }

    /// CSV with header `alpha,w1,Lambda`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["alpha", "w1", "Lambda"])?;
        for s in &self.samples {
            wr.write_record(&[fmt_f64(s.alpha), fmt_f64(s.w1), fmt_f64(s.lambda)])?;
        }
        wr.flush()?;
        Ok(())
    }

    fn merged(&self) -> Vec<(f64, f64)> {
        merge(&self.samples, &self.extrema)
    }
}

/// Samples and refined extrema as `(alpha, Lambda)` sorted by `alpha`.
fn merge(samples: &[Sample], extrema: &[Extremum]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.alpha, s.lambda)).collect();
    pts.extend(extrema.iter().map(|e| (e.alpha, e.lambda)));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    pts
}

/// Splits the crossings of `target` into those whose neighbouring lobes both
/// exceed `floor` and the rest.
fn lobe_crossings(shooter: &Shooter, pts: &[(f64, f64)], target: f64, floor: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let f: Vec<f64> = pts.iter().map(|p| p.1 - target).collect();
    let mut lobes: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &v) in f.iter().enumerate() {
        match lobes.last_mut() {
            Some(l) if (f[l.0] > 0.0) == (v > 0.0) => {
                l.1 = i;
                l.2 = l.2.max(v.abs());
            }
            _ => lobes.push((i, i, v.abs())),
        }
    }
    let g = |a: f64| shooter.lambda_map(a).map(|l| l - target);
    let (mut sure, mut unsure) = (Vec::new(), Vec::new());
    for w in lobes.windows(2) {
        let (i, j) = (w[0].1, w[1].0);
        let root = bisect(g, pts[i].0, f[i], pts[j].0)?;
        if w[0].2 > floor && w[1].2 > floor {
            sure.push(root);
        } else {
            unsure.push(root);
        }
    }
    Ok((sure, unsure))
}

/// Bisection in `ln alpha` for a sign change of `f` on `[a, b]`.
fn bisect(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut fa: f64, mut b: f64) -> Result<f64> {
    while (b - a) > ALPHA_RESOLUTION * a {
        let m = (a * b).sqrt();
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok((a * b).sqrt())
}

/// Golden-section search in `ln alpha` for an extremum of `f` inside `[a, b]`.
fn golden(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, maximize: bool) -> Result<(f64, f64)> {
    let sign = if maximize { -1.0 } else { 1.0 };
    let g = |la: f64| f(la.exp()).map(|v| (sign * v, v));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a.ln(), b.ln());
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    while hi - lo > ALPHA_RESOLUTION {
        if f1.0 < f2.0 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g(x2)?;
        }
    }
    Ok(if f1.0 < f2.0 { (x1.exp(), f1.1) } else { (x2.exp(), f2.1) })
}

fn extrema_of(shooter: &Shooter, samples: &[Sample]) -> Result<Vec<Extremum>> {
    let lam = |a: f64| shooter.lambda_map(a);
    let mut out = Vec::new();
    for w in samples.windows(3) {
        let (l0, l1, l2) = (w[0].lambda, w[1].lambda, w[2].lambda);
        let kind = if l1 > l0 && l1 >= l2 {
            ExtremumKind::Max
        } else if l1 < l0 && l1 <= l2 {
            ExtremumKind::Min
        } else {
            continue;
        };
        let (alpha, lambda) = golden(lam, w[0].alpha, w[2].alpha, kind == ExtremumKind::Max)?;
        out.push(Extremum { alpha, lambda, kind });
    }
    Ok(out)
}

/// Roots of `Lambda(alpha) = target` bracketed by consecutive points.
fn bracketed_roots(shooter: &Shooter, pts: &[(f64, f64)], target: f64) -> Result<Vec<f64>> {
    let f = |a: f64| shooter.lambda_map(a).map(|l| l - target);
    let mut roots = Vec::new();
    for w in pts.windows(2) {
        let (fa, fb) = (w[0].1 - target, w[1].1 - target);
        if fa == 0.0 {
            roots.push(w[0].0);
        } else if (fa > 0.0) != (fb > 0.0) && fb != 0.0 {
            roots.push(bisect(f, w[0].0, fa, w[1].0)?);
        }
    }
    if let Some(&(a, l)) = pts.last() {
        if l == target {
            roots.push(a);
        }
    }
    Ok(roots)
}

/// Samples `Lambda` on a geometric `alpha` grid, in parallel.
pub fn sweep(p: &ProblemParams, alpha_min: f64, alpha_max: f64, n_samples: usize, tol: f64) -> Result<BifurcationCurve> {
    sweep_with(Shooter::new(p, tol)?, alpha_min, alpha_max, n_samples)
}

pub fn sweep_with(shooter: Shooter, alpha_min: f64, alpha_max: f64, n_samples: usize) -> Result<BifurcationCurve> {
    if !(alpha_min > 0.0 && alpha_max > alpha_min) || n_samples < 2 {
        return Err(Error::Parameter(format!(
            "sweep needs 0 < alpha_min < alpha_max and at least two samples (got [{alpha_min}, {alpha_max}], {n_samples})"
        )));
    }
    let grid = log_grid(alpha_min, alpha_max, n_samples);
    let results: Vec<(f64, Result<f64>)> = grid.par_iter().map(|&a| (a, shooter.endpoint(a))).collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut early_stops = Vec::new();
    for (alpha, r) in results {
        match r {
            Ok(w1) => samples.push(Sample { alpha, w1, lambda: shooter.lambda_of_w1(w1) }),
            Err(Error::ZeroCrossing { radius }) => early_stops.push(EarlyStop { alpha, radius }),
            Err(e) => return Err(e),
        }
    }
    samples.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let extrema = if early_stops.is_empty() { extrema_of(&shooter, &samples)? } else { Vec::new() };
    let noise_floor = NOISE_FACTOR * shooter.tol * shooter.lambda_ref;
    let (crossings, uncertain_crossings) = if early_stops.is_empty() {
        lobe_crossings(&shooter, &merge(&samples, &extrema), shooter.lambda_ref, noise_floor)?
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(BifurcationCurve {
        samples,
        extrema,
        crossings,
        uncertain_crossings,
        noise_floor,
        early_stops,
        lambda_ref: shooter.lambda_ref,
        reference: shooter.reference,
        tol: shooter.tol,
        shooter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub alpha: f64,
    /// `u(0)` of the corresponding solution.
    pub u0: f64,
    /// `u(1)`, zero up to the shooting error.
    pub u1: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Uncertain {
    pub alpha: f64,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionCount {
    pub lambda: f64,
    pub roots: Vec<Root>,
    pub uncertain: Vec<Uncertain>,
}

impl SolutionCount {
    pub fn count(&self) -> usize {
        self.roots.len()
    }
}

/// Validated roots of `Lambda(alpha) = lambda` on the curve's range.
pub fn count_solutions(p: &ProblemParams, lambda: f64, curve: &BifurcationCurve) -> Result<SolutionCount> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("require lambda > 0, got {lambda}")));
    }
    if curve.shooter.params.n != p.n || curve.shooter.params.k != p.k || curve.shooter.params.q != p.q || curve.shooter.params.mu != p.mu {
        return Err(Error::Parameter("curve was computed for different parameters".into()));
    }
    if !curve.early_stops.is_empty() {
        return Err(Error::Regime("the curve has samples that stop before r = 1".into()));
    }
    let shooter = &curve.shooter;
    let mut uncertain = Vec::new();
    let tangent: Vec<f64> = curve
        .extrema
        .iter()
        .filter(|e| (e.lambda - lambda).abs() < TANGENCY_REL * lambda)
        .map(|e| e.alpha)
        .collect();
    uncertain.extend(tangent.iter().map(|&alpha| Uncertain { alpha, reason: "tangential" }));

    let candidates = bracketed_roots(shooter, &curve.merged(), lambda)?;
    let validated: Vec<Result<Option<Root>>> = candidates
        .par_iter()
        .map(|&alpha| {
            if tangent.iter().any(|&t| (t - alpha).abs() < 1e-3 * alpha) {
                return Ok(None);
            }
            let prof = shooter.solution_profile(alpha, lambda)?;
            let wk = shooter.weight;
            let params = p.with_lambda(lambda)?;
            let residual = integral_residual(&prof, &params, wk)?;
            let u1 = 1.0 + prof.w.last().expect("non-empty");
            Ok(Some(Root { alpha, u0: 1.0 + prof.w[0], u1, residual }))
        })
        .collect();
    let mut roots = Vec::new();
    for (alpha, v) in candidates.iter().zip(validated) {
        match v? {
            Some(root) if root.residual < ROOT_RESIDUAL && root.u1.abs() < ROOT_BOUNDARY => roots.push(root),
            Some(_) => uncertain.push(Uncertain { alpha: *alpha, reason: "failed validation" }),
            None => uncertain.push(Uncertain { alpha: *alpha, reason: "near tangency" }),
        }
    }
    Ok(SolutionCount { lambda, roots, uncertain })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaStarEstimate {
    /// Largest `Lambda` on the curve; a lower estimate of `lambda*`.
    pub value: f64,
    pub alpha: f64,
}

pub fn estimate_lambda_star(curve: &BifurcationCurve) -> Result<LambdaStarEstimate> {
    curve
        .merged()
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(alpha, value)| LambdaStarEstimate { value, alpha })
        .ok_or_else(|| Error::Domain("empty bifurcation curve".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct IntersectionCount {
    pub count: usize,
    /// Radii of the confirmed sign changes.
    pub zeros: Vec<f64>,
    /// Radii where `a - b` is below the threshold without a sign change.
    pub tangencies: Vec<f64>,
}

/// Number of sign changes of `a - b` on `[r_lo, r_hi]`. Stretches with
/// `|a - b| <= tol max(|a|, |b|)` carry no sign; when the sign is unchanged across one it is
/// reported as a tangency.
pub fn intersection_number<A: RadialCurve + ?Sized, B: RadialCurve + ?Sized>(
    a: &A,
    b: &B,
    r_lo: f64,
    r_hi: f64,
    tol: f64,
) -> Result<IntersectionCount> {
    if !(r_lo >= 0.0 && r_hi > r_lo) {
        return Err(Error::Parameter(format!("bad interval [{r_lo}, {r_hi}]")));
    }
    for (name, (lo, hi)) in [("first", a.domain()), ("second", b.domain())] {
        if lo > r_lo * (1.0 + 1e-12) || hi < r_hi * (1.0 - 1e-12) {
            return Err(Error::Domain(format!("{name} profile covers [{lo}, {hi}], not [{r_lo}, {r_hi}]")));
        }
    }
    let mut grid: Vec<f64> = a.nodes().into_iter().chain(b.nodes()).filter(|r| *r >= r_lo && *r <= r_hi).collect();
    grid.push(r_lo);
    grid.push(r_hi);
    grid.sort_by(|x, y| x.total_cmp(y));
    grid.dedup();
    // at most 0.01 apart in ln r (uniform below the first positive node)
    let mut fine = Vec::with_capacity(grid.len() * 2);
    for w in grid.windows(2) {
        let (x, y) = (w[0], w[1]);
        fine.push(x);
        let pieces = if x > 0.0 { ((y / x).ln() / 0.01).ceil() as usize } else { 16 };
        for j in 1..pieces {
            let f = j as f64 / pieces as f64;
            fine.push(if x > 0.0 { x * (y / x).powf(f) } else { x + (y - x) * f });
        }
    }
    fine.push(*grid.last().expect("non-empty grid"));

    let pair = |r: f64| -> Result<(f64, f64)> {
        match (a.value(r), b.value(r)) {
            (Some(u), Some(v)) => Ok((u - v, u.abs().max(v.abs()))),
            _ => Err(Error::Domain(format!("profiles undefined at r = {r}"))),
        }
    };
    let diff = |r: f64| pair(r).map(|p| p.0);
    let (ds, scale): (Vec<f64>, Vec<f64>) = fine.iter().map(|&r| pair(r)).collect::<Result<Vec<_>>>()?.into_iter().unzip();

    let mut zeros = Vec::new();
    let mut tangencies = Vec::new();
    // index and sign of the last point with |a - b| >= tol
    let mut last: Option<(usize, f64)> = None;
    // smallest |a - b| in the current run below tol
    let mut quiet: Option<usize> = None;
    for (i, &d) in ds.iter().enumerate() {
        if d.abs() <= tol * scale[i] {
            if quiet.is_none_or(|j| d.abs() < ds[j].abs()) {
                quiet = Some(i);
            }
            continue;
        }
        let s = d.signum();
        match last {
            Some((j, ls)) if ls != s => {
                let (mut lo, mut hi) = (fine[j], fine[i]);
                while hi - lo > ALPHA_RESOLUTION * hi {
                    let m = 0.5 * (lo + hi);
                    if diff(m)?.signum() == ls {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                zeros.push(0.5 * (lo + hi));
            }
            _ => {
                if let Some(j) = quiet {
                    tangencies.push(fine[j]);
                }
            }
        }
        quiet = None;
        last = Some((i, s));
    }
    if last.is_none() {
        tangencies = vec![r_lo, r_hi];
    } else if let Some(j) = quiet {
        tangencies.push(fine[j]);
    }
    Ok(IntersectionCount { count: zeros.len(), zeros, tangencies })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_and_golden_on_smooth_functions() {
        let r = bisect(|a| Ok(a * a - 2.0), 1.0, -1.0, 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-7);
        let (a, v) = golden(|a| Ok(-(a.ln() - 1.0).powi(2)), 1.0, 10.0, true).unwrap();
        assert!((a - 1f64.exp()).abs() < 1e-6 && v.abs() < 1e-12);
    }

    #[test]
    fn shallow_profiles_stay_shallow() {
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap();
        let w1 = shoot_endpoint(&p, 1e-4, 1e-10).unwrap();
        assert!(w1 < 0.0 && w1 > -1e-3);
    }

    #[test]
    fn identical_profiles_have_no_intersections() {
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap().with_lambda(5.0).unwrap();
        let prof = crate::radial::integrate_ivp(&p, WeightKind::matukuma(2.0), 2.0, 1.0, 1e-10).unwrap();
        let z = intersection_number(&prof, &prof, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(z.count, 0);
        assert!(!z.tangencies.is_empty());
        assert!(intersection_number(&prof, &prof, 0.0, 2.0, 1e-12).is_err());
    }

    #[test]
    fn sign_changes_are_counted() {
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap().with_lambda(5.0).unwrap();
        let wk = WeightKind::matukuma(2.0);
        let a = crate::radial::integrate_ivp(&p, wk, 2.0, 1.0, 1e-10).unwrap();
        let mut b = a.clone();
        // b - a = 0.01 cos(10 r): zeros at r = pi/20, 3pi/20, 5pi/20
        for (i, &r) in b.rs.clone().iter().enumerate() {
            b.w[i] += 0.01 * (10.0 * r).cos();
            b.dw[i] -= 0.1 * (10.0 * r).sin();
        }
        let z = intersection_number(&a, &b, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(z.count, 3);
        for (j, r) in z.zeros.iter().enumerate() {
            assert!((r - (2 * j + 1) as f64 * std::f64::consts::PI / 20.0).abs() < 1e-5);
        }
    }
}
