//! Shooting from the origin.
//!
//! With `t = ln r` and `s = (r w')^k` the equation becomes
//! `s' = r^(2k) c^-1 lambda h (-w)^q - (n-2k) s`, `w' = s^(1/k)`. The stepper
//! works with `sigma = ln s`, so `sigma' = x - (n-2k)` where `x` is the first
//! phase variable, and `s` is controlled in relative terms even where it is
//! tiny. The degenerate point `r = 0` is left through the leading-order series.

use crate::error::{Error, Result};
use crate::ode::{integrate, DenseSolution, Direction, Event, OdeOptions};
use crate::params::ProblemParams;

use super::{RadialCurve, RadialProfile, WeightKind};

/// Relative size of the series correction at the starting radius.
const SERIES_SMALLNESS: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct IvpOptions {
    /// Starting radius; by default `max(1e-6, sqrt(tol))`, reduced until the
    /// series correction is below 1e-7 relative to `alpha`.
    pub r0: Option<f64>,
    /// Largest step in `t = ln r`.
    pub h_max: f64,
    /// Spacing in `t` of the samples returned by [`IvpSolution::profile`].
    pub max_dt: f64,
}

impl Default for IvpOptions {
    fn default() -> Self {
        Self { r0: None, h_max: 0.25, max_dt: 0.01 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Coefficients {
    n: f64,
    k: f64,
    q: f64,
    /// `ln(lambda / c_{n,k})`
    log_load: f64,
    weight: WeightKind,
}

impl Coefficients {
    fn new(p: &ProblemParams, wk: WeightKind, lambda: f64) -> Self {
        Self { n: p.nf(), k: p.kf(), q: p.q, log_load: (lambda / p.c_nk()).ln(), weight: wk }
    }

    /// `x = r^(2k) c^-1 lambda h(r) (-w)^q / s` with `ln s = sigma`.
    fn x(&self, t: f64, w: f64, sigma: f64) -> f64 {
        let r = t.exp();
        let e = (2.0 * self.k + self.weight.mu - 2.0) * t + self.log_load + self.weight.smooth_part(r).ln()
            + self.q * (-w).max(0.0).ln()
            - sigma;
        e.exp()
    }

    fn rhs(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        [(y[1] / self.k).exp(), self.x(t, y[0], y[1]) - (self.n - 2.0 * self.k)]
    }
}

/// Leading-order state `(w, sigma)` at `r0` together with the series
/// coefficient `B` in `w = -alpha + B k/(2k+mu-2) r^((2k+mu-2)/k)`.
pub fn series_start(p: &ProblemParams, wk: WeightKind, alpha: f64, lambda: f64, r0: f64) -> (f64, f64, f64) {
    let k = p.kf();
    let deg = 2.0 * k + wk.mu - 2.0;
    let a = lambda / p.c_nk() * wk.h0() * alpha.powf(p.q) / (p.nf() + wk.mu - 2.0);
    let b = a.powf(1.0 / k);
    let w0 = -alpha + b * k / deg * r0.powf(deg / k);
    let sigma0 = a.ln() + deg * r0.ln();
    (w0, sigma0, b)
}

fn default_r0(p: &ProblemParams, wk: WeightKind, alpha: f64, lambda: f64, tol: f64) -> f64 {
    let k = p.kf();
    let deg = 2.0 * k + wk.mu - 2.0;
    let (_, _, b) = series_start(p, wk, alpha, lambda, 1.0);
    let cap = (SERIES_SMALLNESS * alpha * deg / (k * b)).powf(k / deg);
    tol.sqrt().max(1e-6).min(cap)
}

/// Regular solution with continuous output, from the origin to `r_end`.
#[derive(Debug, Clone)]
pub struct IvpSolution {
    coef: Coefficients,
    pub alpha: f64,
    pub lambda: f64,
    pub tol: f64,
    pub r0: f64,
    series_b: f64,
    max_dt: f64,
    dense: DenseSolution<2>,
}

impl IvpSolution {
    pub fn weight(&self) -> WeightKind {
        self.coef.weight
    }

    pub fn r_end(&self) -> f64 {
        self.dense.t_end().exp()
    }

    fn degree(&self) -> f64 {
        2.0 * self.coef.k + self.coef.weight.mu - 2.0
    }

    fn state(&self, r: f64) -> Option<(f64, f64)> {
        if r < self.r0 {
            let (k, deg) = (self.coef.k, self.degree());
            let w = -self.alpha + self.series_b * k / deg * r.powf(deg / k);
            let sigma = k * self.series_b.ln() + deg * r.ln();
            return Some((w, sigma));
        }
        let t = r.ln().min(self.dense.t_end());
        self.dense.eval(t).map(|y| (y[0], y[1]))
    }

    /// `(w(r), w'(r))` for `0 <= r <= r_end`.
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        if !(r >= 0.0 && r <= self.r_end() * (1.0 + 1e-15)) {
            return None;
        }
        if r == 0.0 {
            return Some((-self.alpha, 0.0));
        }
        let (w, sigma) = self.state(r)?;
        Some((w, (sigma / self.coef.k).exp() / r))
    }

    /// Phase-plane coordinates `(x, y)` at `t = ln r`, computed from the state.
    pub fn phase(&self, t: f64) -> Option<(f64, f64)> {
        let (w, sigma) = self.state(t.exp())?;
        if !(w < 0.0) {
            return None;
        }
        Some((self.coef.x(t, w, sigma), (sigma / self.coef.k).exp() / -w))
    }

    /// `w(r_end)` and `w'(r_end)`.
    pub fn endpoint(&self) -> (f64, f64) {
        let y = self.dense.y_end();
        let r = self.r_end();
        (y[0], (y[1] / self.coef.k).exp() / r)
    }

    /// Step boundaries in `t`, refined to spacing at most `max_dt`.
    pub fn sample_times(&self, max_dt: f64) -> Vec<f64> {
        self.dense.sample_times(max_dt)
    }

    pub fn dense(&self) -> &DenseSolution<2> {
        &self.dense
    }

    /// Samples `r = 0` and the step mesh refined to spacing `max_dt` in `ln r`.
    pub fn profile(&self, max_dt: f64) -> RadialProfile {
        let ts = self.sample_times(max_dt);
        let mut rs = Vec::with_capacity(ts.len() + 1);
        let mut w = Vec::with_capacity(ts.len() + 1);
        let mut dw = Vec::with_capacity(ts.len() + 1);
        rs.push(0.0);
        w.push(-self.alpha);
        dw.push(0.0);
        for t in ts {
            let y = self.dense.eval(t).expect("sample inside the solution range");
            let r = t.exp();
            rs.push(r);
            w.push(y[0]);
            dw.push((y[1] / self.coef.k).exp() / r);
        }
        RadialProfile::new(rs, w, dw, self.alpha, self.lambda, self.coef.weight, self.tol)
            .expect("stepper output is finite and increasing in r")
    }
}

impl RadialCurve for IvpSolution {
    fn eval(&self, r: f64) -> Option<(f64, f64)> {
        IvpSolution::eval(self, r)
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, self.r_end())
    }

    fn nodes(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.sample_times(self.max_dt).into_iter().map(f64::exp)).collect()
    }
}

/// Regular solution with `w(0) = -alpha`, `w'(0) = 0`, integrated to `r_max`.
pub fn solve_ivp(
    p: &ProblemParams,
    wk: WeightKind,
    alpha: f64,
    r_max: f64,
    tol: f64,
    opts: &IvpOptions,
) -> Result<IvpSolution> {
    let lambda = p.lambda()?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("require alpha > 0, got {alpha}")));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::Parameter(format!("require r_max > 0, got {r_max}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Parameter(format!("require 0 < tol < 1, got {tol}")));
    }
    if wk.mu != p.mu {
        return Err(Error::Parameter(format!("weight mu = {} differs from problem mu = {}", wk.mu, p.mu)));
    }
    let r0 = opts.r0.unwrap_or_else(|| default_r0(p, wk, alpha, lambda, tol)).min(0.01 * r_max);
    if !(r0 > 0.0) {
        return Err(Error::Parameter(format!("starting radius must be positive, got {r0}")));
    }
    let (w0, sigma0, b) = series_start(p, wk, alpha, lambda, r0);
    let coef = Coefficients::new(p, wk, lambda);
    let ode = OdeOptions::with_tol(tol).h_max(opts.h_max);
    let events = [Event::new(|_, y: &[f64; 2]| y[0]).terminal().direction(Direction::Rising)];
    let out = integrate(|t, y| coef.rhs(t, y), r0.ln(), [w0, sigma0], r_max.ln(), &ode, &events)?;
    if let Some(hit) = out.stopped_by {
        return Err(Error::ZeroCrossing { radius: hit.t.exp() });
    }
    Ok(IvpSolution { coef, alpha, lambda, tol, r0, series_b: b, max_dt: opts.max_dt, dense: out.solution })
}

/// Profile of the regular solution on `[0, r_max]`.
pub fn integrate_ivp(p: &ProblemParams, wk: WeightKind, alpha: f64, r_max: f64, tol: f64) -> Result<RadialProfile> {
    let opts = IvpOptions::default();
    Ok(solve_ivp(p, wk, alpha, r_max, tol, &opts)?.profile(opts.max_dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(lambda: f64) -> ProblemParams {
        ProblemParams::new(11, 1, 3.0, 2.0).unwrap().with_lambda(lambda).unwrap()
    }

    #[test]
    fn leading_order_slope_at_origin() {
        let p = canonical(1.0);
        let sol = solve_ivp(&p, WeightKind::matukuma(2.0), 1.0, 1.0, 1e-10, &IvpOptions::default()).unwrap();
        for r in [1e-7, 1e-5, 1e-4] {
            let (_, dw) = sol.eval(r).unwrap();
            assert!((dw / r - 1.0 / 11.0).abs() < 1e-6, "r = {r}: {}", dw / r);
        }
    }

    #[test]
    fn linear_source_matches_closed_form() {
        // k = 1, mu = 2, power weight: w'' + (n-1)/r w' = lambda (-w)^q.
        // For n = 3 and lambda small the first-order expansion in lambda is
        // w = -1 + lambda r^2 / 6.
        let p = ProblemParams::new(3, 1, 2.0, 2.0).unwrap().with_lambda(1e-6).unwrap();
        let sol = solve_ivp(&p, WeightKind::power(2.0), 1.0, 1.0, 1e-12, &IvpOptions::default()).unwrap();
        let (w1, _) = sol.endpoint();
        assert!((w1 - (-1.0 + 1e-6 / 6.0)).abs() < 1e-11, "{}", w1 + 1.0);
    }

    #[test]
    fn profile_satisfies_invariants_and_r0_insensitivity() {
        let p = canonical(5.0);
        let wk = WeightKind::matukuma(2.0);
        let a = solve_ivp(&p, wk, 3.0, 1.0, 1e-11, &IvpOptions::default()).unwrap();
        a.profile(0.01).check_invariants().unwrap();
        let opts = IvpOptions { r0: Some(a.r0 / 2.0), ..IvpOptions::default() };
        let b = solve_ivp(&p, wk, 3.0, 1.0, 1e-11, &opts).unwrap();
        assert!((a.endpoint().0 - b.endpoint().0).abs() < 1e-9);
    }

    #[test]
    fn zero_crossing_is_reported() {
        // far below the critical exponent large loads drive w through zero
        let p = ProblemParams::new(3, 1, 1.2, 2.0).unwrap().with_lambda(50.0).unwrap();
        match solve_ivp(&p, WeightKind::power(2.0), 1.0, 10.0, 1e-9, &IvpOptions::default()) {
            Err(Error::ZeroCrossing { radius }) => assert!(radius > 0.0 && radius < 10.0),
            other => panic!("expected zero crossing, got {other:?}"),
        }
    }

    #[test]
    fn phase_variables_from_state() {
        let p = canonical(2.0);
        let sol = solve_ivp(&p, WeightKind::matukuma(2.0), 1.0, 1.0, 1e-10, &IvpOptions::default()).unwrap();
        let t = -0.5f64;
        let r = t.exp();
        let (w, dw) = sol.eval(r).unwrap();
        let (x, y) = sol.phase(t).unwrap();
        let h = WeightKind::matukuma(2.0).h(r);
        assert!((x - r * 2.0 * h * (-w).powi(3) / dw).abs() < 1e-12 * x);
        assert!((y - r * dw / -w).abs() < 1e-12 * y);
    }
}
