//! The singular solution and the comparison problem with the pure power weight.
//!
//! The singular orbit is the solution of the full phase system that tends to
//! the interior equilibrium `(x_hat, y_hat)` as `t -> -inf`. Its value at
//! `t = 0` fixes the load `lambda_tilde` for which the reconstructed profile
//! satisfies `w(1) = -1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{ProblemParams, RegimeClass};
use crate::phase::{from_phase, integrate_orbit_with, OrbitOptions, PhaseTrajectory, SystemKind};
use crate::radial::{solve_ivp, IvpOptions, IvpSolution, RadialCurve, RadialProfile, WeightKind};

pub const DEFAULT_T0: f64 = -14.0;

/// Grid points and window length of the Picard refinement.
const REFINE_POINTS: usize = 2048;
const REFINE_WINDOW: f64 = 10.0;
const REFINE_SWEEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    None,
    Picard,
}

fn require_supercritical(p: &ProblemParams) -> Result<()> {
    match p.regime().class {
        RegimeClass::BelowCritical | RegimeClass::Critical => Err(Error::Regime(format!(
            "the singular orbit needs q > q* = {} (q = {})",
            p.q_star(),
            p.q
        ))),
        _ => Ok(()),
    }
}

type Mat = [[f64; 2]; 2];

fn mat_vec(a: &Mat, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// `exp(h A)` for a real 2x2 matrix.
pub fn expm2(a: &Mat, h: f64) -> Mat {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let delta = m * m - det;
    let (c, s) = if delta > 0.0 {
        let d = delta.sqrt();
        ((d * h).cosh(), (d * h).sinh() / d)
    } else if delta < 0.0 {
        let d = (-delta).sqrt();
        ((d * h).cos(), (d * h).sin() / d)
    } else {
        (1.0, h)
    };
    let e = (m * h).exp();
    [
        [e * (c + s * (a[0][0] - m)), e * s * a[0][1]],
        [e * s * a[1][0], e * (c + s * (a[1][1] - m))],
    ]
}

/// Start value at `t0` from sweeps of
/// `Xbar(t) = ∫_{-inf}^t exp((t-τ) A0) S(τ, Xbar(τ)) dτ` on `[t0 - 10, t0]`.
fn refined_start(p: &ProblemParams, t0: f64, tol: f64) -> Result<[f64; 2]> {
    let (xh, yh) = (p.x_hat(), p.y_hat());
    let a0 = crate::phase::linearization(p.rho_minus(), xh, yh, p);
    let h = REFINE_WINDOW / REFINE_POINTS as f64;
    let prop = expm2(&a0, h);
    let ts: Vec<f64> = (0..=REFINE_POINTS).map(|j| t0 - REFINE_WINDOW + j as f64 * h).collect();
    let source = |t: f64, d: [f64; 2]| -> [f64; 2] {
        let (fx, fy) = crate::phase::vector_field(t, xh + d[0], yh + d[1], p);
        let lin = mat_vec(&a0, d);
        [fx - lin[0], fy - lin[1]]
    };
    let mut bar = vec![[0.0; 2]; ts.len()];
    for _ in 0..REFINE_SWEEPS {
        let s: Vec<[f64; 2]> = ts.iter().zip(&bar).map(|(&t, &d)| source(t, d)).collect();
        let mut next = vec![[0.0; 2]; ts.len()];
        for j in 1..ts.len() {
            let carried = mat_vec(&prop, next[j - 1]);
            let ps = mat_vec(&prop, s[j - 1]);
            next[j] = [
                carried[0] + 0.5 * h * (ps[0] + s[j][0]),
                carried[1] + 0.5 * h * (ps[1] + s[j][1]),
            ];
        }
        let change = next
            .iter()
            .zip(&bar)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max);
        bar = next;
        if !change.is_finite() {
            return Err(Error::Construction("Picard refinement diverged".into()));
        }
        if change < tol {
            break;
        }
    }
    let last = bar[ts.len() - 1];
    Ok([xh + last[0], yh + last[1]])
}

/// Orbit of the full system from `(x_hat, y_hat)` at `t0` to `t = 0`.
pub fn singular_orbit(p: &ProblemParams, t0: f64, tol: f64, refine: bool) -> Result<PhaseTrajectory> {
    require_supercritical(p)?;
    if !(t0 <= -8.0) {
        return Err(Error::Parameter(format!("singular orbit needs t0 <= -8, got {t0}")));
    }
    let start = if refine { refined_start(p, t0, tol)? } else { [p.x_hat(), p.y_hat()] };
    let opts = OrbitOptions { system: SystemKind::Full, max_dt: 0.01, ..OrbitOptions::default() };
    let tr = integrate_orbit_with(p, t0, start[0], start[1], 0.0, tol, &opts)?;
    if tr.blew_up() {
        return Err(Error::Construction("orbit left every bounded region".into()));
    }
    if let Some(s) = tr.states.iter().find(|s| !(s.x > 0.0 && s.y > 0.0)) {
        return Err(Error::Construction(format!("orbit left the positive quadrant at t = {}", s.t)));
    }
    Ok(tr)
}

fn lambda_from_endpoint(p: &ProblemParams, x: f64, y: f64) -> f64 {
    2f64.powf(0.5 * p.mu) * p.c_nk() * x * y.powf(p.kf())
}

/// `lambda_tilde = 2^(mu/2) c x(0) y(0)^k` along the singular orbit started at `t0 = -14`.
pub fn lambda_tilde(p: &ProblemParams, tol: f64) -> Result<f64> {
    lambda_tilde_from(p, DEFAULT_T0, tol, false)
}

pub fn lambda_tilde_from(p: &ProblemParams, t0: f64, tol: f64, refine: bool) -> Result<f64> {
    let tr = singular_orbit(p, t0, tol, refine)?;
    let end = tr.last().ok_or_else(|| Error::Construction("empty orbit".into()))?;
    Ok(lambda_from_endpoint(p, end.x, end.y))
}

/// `[c x_hat y_hat^k / lambda]^(1/(q-k))`, the coefficient of `r^(-1/gamma)`.
pub fn asymptotic_constant(p: &ProblemParams, lambda: f64) -> f64 {
    (p.c_nk() * p.x_hat() * p.y_hat().powf(p.kf()) / lambda).powf(1.0 / (p.q - p.kf()))
}

/// The singular profile `w_tilde` reconstructed along the singular orbit.
#[derive(Debug, Clone)]
pub struct SingularSolution {
    pub lambda_tilde: f64,
    pub trajectory: PhaseTrajectory,
    pub profile: RadialProfile,
    pub t0: f64,
    pub tol: f64,
    pub refinement: Refinement,
    params: ProblemParams,
}

impl SingularSolution {
    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn asymptotic_constant(&self) -> f64 {
        asymptotic_constant(&self.params, self.lambda_tilde)
    }
}

impl RadialCurve for SingularSolution {
    fn eval(&self, r: f64) -> Option<(f64, f64)> {
        let t = r.ln();
        let (x, y) = self.trajectory.eval(t)?;
        let w = from_phase(t, x, y, &self.params, WeightKind::matukuma(self.params.mu)).ok()?;
        Some((w, -w * y / r))
    }

    fn domain(&self) -> (f64, f64) {
        let (a, b) = self.trajectory.t_range().expect("non-empty orbit");
        (a.exp(), b.exp())
    }

    fn nodes(&self) -> Vec<f64> {
        self.trajectory.states.iter().map(|s| s.t.exp()).collect()
    }
}

pub fn singular_profile(p: &ProblemParams, r_min: f64, tol: f64) -> Result<SingularSolution> {
    singular_profile_with(p, r_min, tol, DEFAULT_T0, false)
}

/// As [`singular_profile`] with explicit `t0` (moved below `ln r_min - 2` if needed).
pub fn singular_profile_with(p: &ProblemParams, r_min: f64, tol: f64, t0: f64, refine: bool) -> Result<SingularSolution> {
    if !(r_min > 0.0 && r_min < 1.0) {
        return Err(Error::Parameter(format!("require 0 < r_min < 1, got {r_min}")));
    }
    let t0 = t0.min(r_min.ln() - 2.0);
    let trajectory = singular_orbit(p, t0, tol, refine)?;
    let end = trajectory.last().ok_or_else(|| Error::Construction("empty orbit".into()))?;
    let lt = lambda_from_endpoint(p, end.x, end.y);
    let params = p.with_lambda(lt)?;
    let wk = WeightKind::matukuma(p.mu);

    let t_lo = r_min.ln();
    let pieces = ((-t_lo) / 0.01).ceil() as usize;
    let mut rs = Vec::with_capacity(pieces + 1);
    let mut w = Vec::with_capacity(pieces + 1);
    let mut dw = Vec::with_capacity(pieces + 1);
    for j in 0..=pieces {
        let t = if j == pieces { 0.0 } else { t_lo * (1.0 - j as f64 / pieces as f64) };
        let (x, y) = trajectory.eval(t).ok_or_else(|| Error::Internal(format!("orbit misses t = {t}")))?;
        let wv = from_phase(t, x, y, &params, wk)?;
        let r = t.exp();
        rs.push(r);
        w.push(wv);
        dw.push(-wv * y / r);
    }
    let alpha = -w[0];
    let profile = RadialProfile::new(rs, w, dw, alpha, lt, wk, tol)?;
    Ok(SingularSolution {
        lambda_tilde: lt,
        trajectory,
        profile,
        t0,
        tol,
        refinement: if refine { Refinement::Picard } else { Refinement::None },
        params,
    })
}

/// Closed-form singular solution `U_tilde(r) = -C r^(-1/gamma)` of the power-weight problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmdenSingular {
    pub coefficient: f64,
    pub exponent: f64,
}

impl EmdenSingular {
    pub fn at(&self, r: f64) -> f64 {
        -self.coefficient * r.powf(-self.exponent)
    }

    /// Samples on a geometric grid of `[lo, hi]`.
    pub fn profile(&self, lo: f64, hi: f64, points: usize, lambda: f64, mu: f64) -> Result<RadialProfile> {
        let rs = crate::radial::log_grid(lo, hi, points);
        RadialProfile::sample(self, &rs, self.coefficient, lambda, WeightKind::power(mu), 0.0)
    }
}

impl RadialCurve for EmdenSingular {
    fn eval(&self, r: f64) -> Option<(f64, f64)> {
        if !(r > 0.0) {
            return None;
        }
        let w = self.at(r);
        Some((w, -self.exponent * w / r))
    }

    fn domain(&self) -> (f64, f64) {
        (f64::MIN_POSITIVE, f64::INFINITY)
    }

    fn nodes(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[allow(non_snake_case)]
pub fn emden_singular_U(p: &ProblemParams, lambda_tilde: f64) -> EmdenSingular {
    EmdenSingular { coefficient: asymptotic_constant(p, lambda_tilde), exponent: 1.0 / p.gamma() }
}

/// Regular power-weight solution with `U(0) = -1` and load `lambda_tilde`.
pub fn emden_regular_solution(p: &ProblemParams, lambda_tilde: f64, r_max: f64, tol: f64) -> Result<IvpSolution> {
    if p.q < p.q_star() - crate::params::CRITICAL_BAND {
        return Err(Error::Regime(format!("U needs q >= q* = {}", p.q_star())));
    }
    let params = p.with_lambda(lambda_tilde)?;
    solve_ivp(&params, WeightKind::power(p.mu), 1.0, r_max, tol, &IvpOptions::default())
}

#[allow(non_snake_case)]
pub fn emden_regular_U(p: &ProblemParams, lambda_tilde: f64, r_max: f64, tol: f64) -> Result<RadialProfile> {
    Ok(emden_regular_solution(p, lambda_tilde, r_max, tol)?.profile(IvpOptions::default().max_dt))
}

/// `(F_alpha w)(r) = w(r / alpha^gamma) / alpha` applied to a curve.
#[derive(Debug, Clone, Copy)]
pub struct Rescaled<'a, C: RadialCurve + ?Sized> {
    pub inner: &'a C,
    pub alpha: f64,
    pub gamma: f64,
}

impl<C: RadialCurve + ?Sized> Rescaled<'_, C> {
    fn stretch(&self) -> f64 {
        self.alpha.powf(self.gamma)
    }
}

impl<C: RadialCurve + ?Sized> RadialCurve for Rescaled<'_, C> {
    fn eval(&self, r: f64) -> Option<(f64, f64)> {
        let s = self.stretch();
        let (w, dw) = self.inner.eval(r / s)?;
        Some((w / self.alpha, dw / (self.alpha * s)))
    }

    fn domain(&self) -> (f64, f64) {
        let (a, b) = self.inner.domain();
        let s = self.stretch();
        (a * s, b * s)
    }

    fn nodes(&self) -> Vec<f64> {
        let s = self.stretch();
        self.inner.nodes().into_iter().map(|r| r * s).collect()
    }
}

/// `F_alpha` on a sampled profile: nodes move to `r_i alpha^gamma`.
pub fn rescale(prof: &RadialProfile, p: &ProblemParams, alpha: f64) -> Result<RadialProfile> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("require alpha > 0, got {alpha}")));
    }
    let s = alpha.powf(p.gamma());
    RadialProfile::new(
        prof.rs.iter().map(|r| r * s).collect(),
        prof.w.iter().map(|w| w / alpha).collect(),
        prof.dw.iter().map(|d| d / (alpha * s)).collect(),
        prof.alpha / alpha,
        prof.lambda,
        prof.weight,
        prof.tol,
    )
}

/// `sup |a - b|` on `[lo, hi]` sampled at `points` geometric nodes.
pub fn sup_distance<A: RadialCurve + ?Sized, B: RadialCurve + ?Sized>(a: &A, b: &B, lo: f64, hi: f64, points: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for r in crate::radial::log_grid(lo, hi, points) {
        let va = a.value(r).ok_or_else(|| Error::Domain(format!("first curve undefined at r = {r}")))?;
        let vb = b.value(r).ok_or_else(|| Error::Domain(format!("second curve undefined at r = {r}")))?;
        worst = worst.max((va - vb).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::integral_residual;

    fn canonical() -> ProblemParams {
        ProblemParams::new(11, 1, 3.0, 2.0).unwrap()
    }

    #[test]
    fn matrix_exponential_matches_series() {
        for a in [[[-8.0, -24.0], [1.0, 1.0]], [[1.0, 2.0], [3.0, -1.0]], [[2.0, 1.0], [0.0, 2.0]]] {
            let h = 0.37;
            let e = expm2(&a, h);
            // Taylor series with many terms
            let mut term = [[1.0, 0.0], [0.0, 1.0]];
            let mut sum = term;
            for j in 1..60 {
                let mut next = [[0.0; 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        next[r][c] = (term[r][0] * a[0][c] + term[r][1] * a[1][c]) * h / j as f64;
                    }
                }
                term = next;
                for r in 0..2 {
                    for c in 0..2 {
                        sum[r][c] += term[r][c];
                    }
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    assert!((e[r][c] - sum[r][c]).abs() < 1e-12 * (1.0 + sum[r][c].abs()), "{a:?}");
                }
            }
        }
    }

    #[test]
    fn regime_is_enforced() {
        let p = ProblemParams::new(11, 1, 1.2, 2.0).unwrap();
        assert!(matches!(lambda_tilde(&p, 1e-10), Err(Error::Regime(_))));
        assert!(matches!(singular_orbit(&canonical(), -5.0, 1e-10, false), Err(Error::Parameter(_))));
    }

    #[test]
    fn refinement_is_consistent() {
        let p = canonical();
        let a = singular_orbit(&p, -10.0, 1e-12, false).unwrap().last().unwrap();
        let b = singular_orbit(&p, -10.0, 1e-12, true).unwrap().last().unwrap();
        assert!((a.x - b.x).abs() < 1e-6 && (a.y - b.y).abs() < 1e-6);
    }

    #[test]
    fn singular_profile_properties() {
        let p = canonical();
        let s = singular_profile(&p, 1e-5, 1e-12).unwrap();
        assert!((s.profile.w.last().unwrap() + 1.0).abs() < 1e-8);
        let c4 = s.value(1e-4).unwrap() * -(1e-4f64).powf(1.0 / p.gamma());
        let c5 = s.value(1e-5).unwrap() * -(1e-5f64).powf(1.0 / p.gamma());
        assert!((c4 / c5 - 1.0).abs() < 0.01);
        assert!((c5 / s.asymptotic_constant() - 1.0).abs() < 1e-6);
        let res = integral_residual(&s.profile, s.params(), WeightKind::matukuma(2.0)).unwrap();
        assert!(res < 1e-6, "{res:e}");
    }

    #[test]
    fn emden_singular_is_exact() {
        let p = canonical();
        let lt = 10.0;
        let u = emden_singular_U(&p, lt);
        assert!((u.at(1.0) + asymptotic_constant(&p, lt)).abs() < 1e-15);
        let params = p.with_lambda(lt).unwrap();
        let prof = u.profile(0.1, 10.0, 2001, lt, 2.0).unwrap();
        let res = integral_residual(&prof, &params, WeightKind::power(2.0)).unwrap();
        assert!(res < 1e-9, "{res:e}");
        for r in [0.1, 1.0, 10.0] {
            let (w, dw) = u.eval(r).unwrap();
            let s = crate::phase::to_phase(r, w, dw, &params, WeightKind::power(2.0)).unwrap();
            assert!((s.x - p.x_hat()).abs() < 1e-12 && (s.y - p.y_hat()).abs() < 1e-12);
        }
        // self-similar under F_alpha
        let scaled = Rescaled { inner: &u, alpha: 37.0, gamma: p.gamma() };
        for r in [0.5, 1.0, 3.0] {
            assert!((scaled.value(r).unwrap() - u.at(r)).abs() < 1e-13 * u.at(r).abs());
        }
    }

    #[test]
    fn rescale_identity_and_domain() {
        let p = canonical().with_lambda(5.0).unwrap();
        let prof = crate::radial::integrate_ivp(&p, WeightKind::power(2.0), 2.0, 1.0, 1e-10).unwrap();
        assert_eq!(rescale(&prof, &p, 1.0).unwrap(), prof);
        let r = rescale(&prof, &p, 100.0).unwrap();
        assert!((r.r_max() - 100.0).abs() < 1e-12);
    }
}
