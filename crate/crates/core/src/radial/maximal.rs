//! Monotone iteration for the maximal solution of the Dirichlet problem.
//!
//! Starting from the supersolution `u ≡ 0`,
//! `u_i(r) = -∫_r^1 [c^-1 τ^(k-n) ∫_0^τ s^(n-1) h(s) lambda (1 - u_{i-1})^q ds]^(1/k) dτ`
//! decreases in `i`; it converges for `lambda < lambda*` and grows without
//! bound otherwise.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::quadrature::{cumulative_simpson, ProductRule};

use super::{RadialProfile, WeightKind};

#[derive(Debug, Clone, Copy)]
pub struct MaximalOptions {
    /// Number of grid intervals on `[0, 1]` (even).
    pub intervals: usize,
    /// `sup |u|` beyond which the iteration is declared divergent.
    pub ceiling: f64,
    pub weight: Option<WeightKind>,
}

impl Default for MaximalOptions {
    fn default() -> Self {
        Self { intervals: 8192, ceiling: 1e8, weight: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaximalStatus {
    Converged,
    Diverged,
    Inconclusive,
}

/// The map `u_{i-1} -> u_i` on a fixed uniform grid of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct MonotoneMap {
    pub rs: Vec<f64>,
    h: f64,
    load: Vec<f64>,
    rule: ProductRule,
    n: f64,
    k: f64,
    q: f64,
}

impl MonotoneMap {
    pub fn new(p: &ProblemParams, wk: WeightKind, intervals: usize) -> Result<Self> {
        let lambda = p.lambda()?;
        if intervals < 2 || !intervals.is_multiple_of(2) {
            return Err(Error::Parameter(format!("grid needs an even number of intervals, got {intervals}")));
        }
        let h = 1.0 / intervals as f64;
        let rs: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
        let scale = lambda / p.c_nk();
        let load = rs.iter().map(|&r| scale * wk.smooth_part(r)).collect();
        let rule = ProductRule::new(h, p.nf() + wk.mu - 3.0)?;
        Ok(Self { rs, h, load, rule, n: p.nf(), k: p.kf(), q: p.q })
    }

    /// Returns the next iterate and its derivative on the grid.
    pub fn apply(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let len = self.rs.len();
        let g: Vec<f64> = (0..len).map(|i| self.load[i] * (1.0 - u[i]).max(0.0).powf(self.q)).collect();
        let mut inner = vec![0.0; len];
        let mut acc = 0.0;
        for j in 0..(len - 1) / 2 {
            let (wf, wh) = (self.rule.full(j), self.rule.half(j));
            let i = 2 * j;
            inner[i + 1] = acc + wh[0] * g[i] + wh[1] * g[i + 1] + wh[2] * g[i + 2];
            acc += wf[0] * g[i] + wf[1] * g[i + 1] + wf[2] * g[i + 2];
            inner[i + 2] = acc;
        }
        let z: Vec<f64> = self
            .rs
            .iter()
            .zip(&inner)
            .map(|(&r, &v)| if r == 0.0 { 0.0 } else { (r.powf(self.k - self.n) * v.max(0.0)).powf(1.0 / self.k) })
            .collect();
        let cum = cumulative_simpson(&z, self.h, 0.0);
        let total = cum[len - 1];
        (cum.iter().map(|c| c - total).collect(), z)
    }
}

#[derive(Debug, Clone)]
pub struct MaximalSolution {
    pub status: MaximalStatus,
    pub iterations: usize,
    /// Sup-distance between the last two iterates.
    pub last_change: f64,
    /// Sup norm of the last iterate.
    pub sup_norm: f64,
    /// Last iterate in the shifted form `w = u - 1`; absent after divergence.
    pub profile: Option<RadialProfile>,
    /// Last iterate `u` on the grid of `map`.
    pub u: Vec<f64>,
    pub map: MonotoneMap,
}

impl MaximalSolution {
    /// `sup |T u - u|` for one further application of the map.
    pub fn fixed_point_defect(&self) -> f64 {
        let (next, _) = self.map.apply(&self.u);
        next.iter().zip(&self.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Monotone iteration under the Matukuma weight on a grid of 8192 intervals.
pub fn maximal_solution(p: &ProblemParams, tol: f64, iter_cap: usize) -> Result<MaximalSolution> {
    maximal_solution_with(p, tol, iter_cap, &MaximalOptions::default())
}

pub fn maximal_solution_with(
    p: &ProblemParams,
    tol: f64,
    iter_cap: usize,
    opts: &MaximalOptions,
) -> Result<MaximalSolution> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("require tol > 0, got {tol}")));
    }
    let lambda = p.lambda()?;
    let wk = opts.weight.unwrap_or(WeightKind::matukuma(p.mu));
    let map = MonotoneMap::new(p, wk, opts.intervals)?;
    let mut u = vec![0.0; map.rs.len()];
    let mut z = vec![0.0; map.rs.len()];
    let mut change = f64::INFINITY;
    let mut status = MaximalStatus::Inconclusive;
    let mut iterations = 0;

    for it in 1..=iter_cap {
        iterations = it;
        let (next, dz) = map.apply(&u);
        let sup = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !sup.is_finite() || sup > opts.ceiling {
            status = MaximalStatus::Diverged;
            u = next;
            break;
        }
        for (i, (a, b)) in next.iter().zip(&u).enumerate() {
            if *a > *b + 1e-12 * b.abs().max(1.0) {
                return Err(Error::Internal(format!(
                    "monotone iteration increased at r = {} in step {it} ({b} -> {a})",
                    map.rs[i]
                )));
            }
        }
        change = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        u = next;
        z = dz;
        if change < tol {
            status = MaximalStatus::Converged;
            break;
        }
    }

    let sup_norm = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let profile = if status == MaximalStatus::Diverged {
        None
    } else {
        let w: Vec<f64> = u.iter().map(|v| v - 1.0).collect();
        Some(RadialProfile::new(map.rs.clone(), w, z, 1.0 - u[0], lambda, wk, tol)?)
    };
    Ok(MaximalSolution { status, iterations, last_change: change, sup_norm, profile, u, map })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_load_matches_linearization() {
        // to first order in lambda, -u solves S_k(D^2 v) = lambda h with v = 0 on the boundary;
        // for k = 1, power weight, mu = 2: u = -lambda (1 - r^2) / (2n)
        let p = ProblemParams::new(5, 1, 2.0, 2.0).unwrap().with_lambda(1e-7).unwrap();
        let opts = MaximalOptions { weight: Some(WeightKind::power(2.0)), ..MaximalOptions::default() };
        let m = maximal_solution_with(&p, 1e-15, 50, &opts).unwrap();
        assert_eq!(m.status, MaximalStatus::Converged);
        for (i, &r) in m.map.rs.iter().enumerate().step_by(512) {
            let lin = -1e-7 * (1.0 - r * r) / 10.0;
            assert!((m.u[i] - lin).abs() < 1e-13, "r={r}: {} vs {lin}", m.u[i]);
        }
    }

    #[test]
    fn converges_below_and_diverges_far_above() {
        let base = ProblemParams::new(11, 1, 3.0, 2.0).unwrap();
        let lb = crate::params::lambda_star_lower_bound(&base);
        let p = base.with_lambda(lb).unwrap();
        let m = maximal_solution(&p, 1e-12, 5000).unwrap();
        assert_eq!(m.status, MaximalStatus::Converged);
        assert!(m.fixed_point_defect() < 1e-11);
        // subsolution barrier
        for (i, &r) in m.map.rs.iter().enumerate() {
            assert!(0.5 * (r * r - 1.0) <= m.u[i] + 1e-12);
        }
        let p = base.with_lambda(1000.0).unwrap();
        assert_eq!(maximal_solution(&p, 1e-12, 5000).unwrap().status, MaximalStatus::Diverged);
    }
}
