//! Integral-equation oracle for the regular solution.
//!
//! `w(r) = -alpha + ∫_0^r [t^(k-n) ∫_0^t c^-1 lambda s^(n-1) h(s) (-w)^q ds]^(1/k) dt`
//! is solved on a uniform grid. A single fixed-point iteration over the whole
//! interval does not converge once `alpha` is large, so the grid is marched in
//! short windows and the iteration is run to convergence on each window.
//! The inner integral uses [`ProductRule`] with the exact weight
//! `s^(n+mu-3)`, the outer one Simpson's rule.

use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::quadrature::{cumulative_simpson, ProductRule};

use super::{RadialProfile, WeightKind};

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub points_per_unit: usize,
    /// Window length in grid intervals (even).
    pub window: usize,
    /// Iteration cap per window.
    pub max_iter: usize,
    /// Keep every `stride`-th node in the returned profile.
    pub stride: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { points_per_unit: 1 << 20, window: 64, max_iter: 200, stride: 16 }
    }
}

struct Grid {
    h: f64,
    rs: Vec<f64>,
    /// `c^-1 lambda h(s) / s^(mu-2)` at the nodes.
    load: Vec<f64>,
    rule: ProductRule,
    k: f64,
    n: f64,
    q: f64,
}

impl Grid {
    fn new(p: &ProblemParams, wk: WeightKind, r_max: f64, opts: &PicardOptions) -> Result<Self> {
        let lambda = p.lambda()?;
        if opts.window < 2 || !opts.window.is_multiple_of(2) || opts.stride == 0 || opts.points_per_unit < 2 {
            return Err(Error::Parameter("Picard window must be even and positive, stride positive".into()));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::Parameter(format!("require r_max > 0, got {r_max}")));
        }
        let raw = (r_max * opts.points_per_unit as f64).ceil() as usize;
        let intervals = raw.div_ceil(opts.window).max(1) * opts.window;
        let h = r_max / intervals as f64;
        let rs: Vec<f64> = (0..=intervals).map(|i| if i == intervals { r_max } else { i as f64 * h }).collect();
        let scale = lambda / p.c_nk();
        let load = rs.iter().map(|&r| scale * wk.smooth_part(r)).collect();
        let rule = ProductRule::new(h, p.nf() + wk.mu - 3.0)?;
        Ok(Self { h, rs, load, rule, k: p.kf(), n: p.nf(), q: p.q })
    }

    /// Inner integral on nodes `a..=b` (a even) from `g`, starting at `inner_a`.
    fn inner(&self, a: usize, b: usize, g: &[f64], inner_a: f64, out: &mut [f64]) {
        out[0] = inner_a;
        let mut acc = inner_a;
        let mut i = a;
        while i < b {
            let j = i / 2;
            let (wf, wh) = (self.rule.full(j), self.rule.half(j));
            let loc = i - a;
            let gs = [g[loc], g[loc + 1], g[loc + 2]];
            out[loc + 1] = acc + wh[0] * gs[0] + wh[1] * gs[1] + wh[2] * gs[2];
            acc += wf[0] * gs[0] + wf[1] * gs[1] + wf[2] * gs[2];
            out[loc + 2] = acc;
            i += 2;
        }
    }

    fn slope(&self, r: f64, inner: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let v = r.powf(self.k - self.n) * inner.max(0.0);
        if self.k == 1.0 {
            v
        } else {
            v.powf(1.0 / self.k)
        }
    }

    fn source(&self, i: usize, w: f64) -> f64 {
        self.load[i] * (-w).max(0.0).powf(self.q)
    }
}

fn finish(grid: &Grid, w: &[f64], z: &[f64], alpha: f64, lambda: f64, wk: WeightKind, tol: f64, stride: usize) -> Result<RadialProfile> {
    let last = grid.rs.len() - 1;
    let keep: Vec<usize> = (0..=last).filter(|i| i % stride == 0 || *i == last).collect();
    RadialProfile::new(
        keep.iter().map(|&i| grid.rs[i]).collect(),
        keep.iter().map(|&i| w[i]).collect(),
        keep.iter().map(|&i| z[i]).collect(),
        alpha,
        lambda,
        wk,
        tol,
    )
}

/// One application of the integral map to `w ≡ -alpha` over the whole grid.
pub fn picard_first_iterate(
    p: &ProblemParams,
    wk: WeightKind,
    alpha: f64,
    r_max: f64,
    opts: &PicardOptions,
) -> Result<RadialProfile> {
    let grid = Grid::new(p, wk, r_max, opts)?;
    let n = grid.rs.len();
    let g: Vec<f64> = (0..n).map(|i| grid.source(i, -alpha)).collect();
    let mut inner = vec![0.0; n];
    grid.inner(0, n - 1, &g, 0.0, &mut inner);
    let z: Vec<f64> = (0..n).map(|i| grid.slope(grid.rs[i], inner[i])).collect();
    let w = cumulative_simpson(&z, grid.h, -alpha);
    finish(&grid, &w, &z, alpha, p.lambda()?, wk, 0.0, opts.stride)
}

/// Oracle solution with default grid options.
pub fn picard_oracle(p: &ProblemParams, wk: WeightKind, alpha: f64, r_max: f64, tol: f64) -> Result<RadialProfile> {
    picard_oracle_with(p, wk, alpha, r_max, tol, &PicardOptions::default())
}

pub fn picard_oracle_with(
    p: &ProblemParams,
    wk: WeightKind,
    alpha: f64,
    r_max: f64,
    tol: f64,
    opts: &PicardOptions,
) -> Result<RadialProfile> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("require alpha > 0, got {alpha}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("require tol > 0, got {tol}")));
    }
    let grid = Grid::new(p, wk, r_max, opts)?;
    let n = grid.rs.len();
    let width = opts.window;
    let mut w = vec![-alpha; n];
    let mut z = vec![0.0; n];
    let mut inner = vec![0.0; n];

    let mut g = vec![0.0; width + 1];
    let mut inner_win = vec![0.0; width + 1];
    let mut z_win = vec![0.0; width + 1];

    let mut a = 0;
    while a + 1 < n {
        let b = a + width;
        // predictor: continue with the current slope
        for i in a + 1..=b {
            w[i] = w[a] + z[a] * (grid.rs[i] - grid.rs[a]);
        }
        let mut converged = false;
        let mut change = f64::INFINITY;
        for _ in 0..opts.max_iter {
            for (loc, i) in (a..=b).enumerate() {
                g[loc] = grid.source(i, w[i]);
            }
            grid.inner(a, b, &g, inner[a], &mut inner_win);
            for (loc, i) in (a..=b).enumerate() {
                z_win[loc] = grid.slope(grid.rs[i], inner_win[loc]);
            }
            let next = cumulative_simpson(&z_win, grid.h, w[a]);
            change = (1..=width).map(|loc| (next[loc] - w[a + loc]).abs()).fold(0.0, f64::max);
            w[a + 1..=b].copy_from_slice(&next[1..]);
            if !change.is_finite() {
                break;
            }
            if change < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Oracle(format!(
                "window at r = {} did not converge in {} iterations (last change {change:e})",
                grid.rs[a], opts.max_iter
            )));
        }
        if w[b] >= 0.0 {
            return Err(Error::Oracle(format!("solution reaches zero before r = {}", grid.rs[b])));
        }
        // final slopes and inner integral consistent with the accepted values
        for (loc, i) in (a..=b).enumerate() {
            g[loc] = grid.source(i, w[i]);
        }
        grid.inner(a, b, &g, inner[a], &mut inner_win);
        for (loc, i) in (a..=b).enumerate() {
            inner[i] = inner_win[loc];
            z[i] = grid.slope(grid.rs[i], inner_win[loc]);
        }
        a = b;
    }
    finish(&grid, &w, &z, alpha, p.lambda()?, wk, tol, opts.stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::ivp::series_start;

    fn small_opts() -> PicardOptions {
        PicardOptions { points_per_unit: 1 << 14, window: 64, max_iter: 200, stride: 1 }
    }

    #[test]
    fn first_iterate_matches_series_coefficient() {
        // with the power weight and w ≡ -alpha the first iterate is exactly
        // -alpha + B k/(2k+mu-2) r^((2k+mu-2)/k)
        for (n, k, q, mu) in [(11, 1, 3.0, 2.0), (13, 2, 5.0, 2.0), (11, 1, 3.0, 3.0)] {
            let p = ProblemParams::new(n, k, q, mu).unwrap().with_lambda(1.7).unwrap();
            let wk = WeightKind::power(mu);
            let prof = picard_first_iterate(&p, wk, 1.3, 1.0, &small_opts()).unwrap();
            for (i, &r) in prof.rs.iter().enumerate() {
                let (w, _, _) = series_start(&p, wk, 1.3, 1.7, r.max(1e-300));
                assert!((prof.w[i] - w).abs() < 1e-12, "n={n} k={k} r={r}: {} vs {w}", prof.w[i]);
            }
        }
    }

    #[test]
    fn refinement_converges() {
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap().with_lambda(3.0).unwrap();
        let wk = WeightKind::matukuma(2.0);
        let coarse = picard_oracle_with(&p, wk, 2.0, 1.0, 1e-13, &small_opts()).unwrap();
        let fine_opts = PicardOptions { points_per_unit: 1 << 16, ..small_opts() };
        let fine = picard_oracle_with(&p, wk, 2.0, 1.0, 1e-13, &fine_opts).unwrap();
        let d = (coarse.w.last().unwrap() - fine.w.last().unwrap()).abs();
        assert!(d < 1e-11, "{d:e}");
        coarse.check_invariants().unwrap();
    }

    #[test]
    fn zero_crossing_is_an_oracle_failure() {
        let p = ProblemParams::new(3, 1, 1.2, 2.0).unwrap().with_lambda(50.0).unwrap();
        let r = picard_oracle_with(&p, WeightKind::power(2.0), 1.0, 10.0, 1e-10, &small_opts());
        assert!(matches!(r, Err(Error::Oracle(_))));
    }
}
