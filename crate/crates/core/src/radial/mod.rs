//! The radial problem `(r^(n-k) (w')^k)' = r^(n-1) c^-1 lambda h(r) (-w)^q`.
//!
//! Profiles are stored in the shifted form `w = u - 1`, so `w(0) = -alpha`
//! and a solution of the Dirichlet problem corresponds to `w(1) = -1`.

mod ivp;
mod maximal;
mod picard;
mod residual;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::params::ProblemParams;

pub use ivp::{integrate_ivp, solve_ivp, series_start, IvpOptions, IvpSolution};
pub use maximal::{maximal_solution, maximal_solution_with, MaximalOptions, MaximalSolution, MaximalStatus, MonotoneMap};
pub use picard::{picard_first_iterate, picard_oracle, picard_oracle_with, PicardOptions};
pub use residual::{integral_residual, integral_residual_on};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFamily {
    Matukuma,
    Power,
}

/// Radial weight: Matukuma `r^(mu-2) / (1+r^2)^(mu/2)` or pure power `r^(mu-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightKind {
    pub kind: WeightFamily,
    pub mu: f64,
}

impl WeightKind {
    pub fn matukuma(mu: f64) -> Self {
        Self { kind: WeightFamily::Matukuma, mu }
    }

    pub fn power(mu: f64) -> Self {
        Self { kind: WeightFamily::Power, mu }
    }

    /// `h(r)` without argument checks.
    pub fn h(&self, r: f64) -> f64 {
        let base = if self.mu == 2.0 { 1.0 } else { r.powf(self.mu - 2.0) };
        base * self.smooth_part(r)
    }

    /// `h(r) / r^(mu-2)`, which is smooth and equal to 1 at the origin.
    pub fn smooth_part(&self, r: f64) -> f64 {
        match self.kind {
            WeightFamily::Matukuma => (1.0 + r * r).powf(-0.5 * self.mu),
            WeightFamily::Power => 1.0,
        }
    }

    /// Coefficient of `r^(mu-2)` in `h` at the origin.
    pub fn h0(&self) -> f64 {
        1.0
    }
}

impl std::fmt::Display for WeightKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            WeightFamily::Matukuma => write!(f, "matukuma"),
            WeightFamily::Power => write!(f, "power"),
        }
    }
}

pub fn weight_h(r: f64, wk: WeightKind) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("weight needs finite r >= 0, got {r}")));
    }
    if !(wk.mu >= 2.0) {
        return Err(Error::Parameter(format!("require mu >= 2, got {}", wk.mu)));
    }
    Ok(wk.h(r))
}

/// Anything that can be evaluated as `(w(r), w'(r))` on a radial interval.
pub trait RadialCurve {
    fn eval(&self, r: f64) -> Option<(f64, f64)>;

    /// Closed interval on which [`RadialCurve::eval`] is defined.
    fn domain(&self) -> (f64, f64);

    /// Radii where the curve is known most accurately, increasing.
    fn nodes(&self) -> Vec<f64>;

    fn value(&self, r: f64) -> Option<f64> {
        self.eval(r).map(|(w, _)| w)
    }
}

/// Sampled radial profile with cubic Hermite interpolation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub rs: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub weight: WeightKind,
    pub tol: f64,
}

impl RadialProfile {
    pub fn new(
        rs: Vec<f64>,
        w: Vec<f64>,
        dw: Vec<f64>,
        alpha: f64,
        lambda: f64,
        weight: WeightKind,
        tol: f64,
    ) -> Result<Self> {
        if rs.is_empty() || rs.len() != w.len() || rs.len() != dw.len() {
            return Err(Error::Domain(format!(
                "profile arrays must be non-empty and equally long ({}, {}, {})",
                rs.len(),
                w.len(),
                dw.len()
            )));
        }
        if rs.windows(2).any(|p| !(p[1] > p[0])) || !(rs[0] >= 0.0) {
            return Err(Error::Domain("profile radii must be nonnegative and strictly increasing".into()));
        }
        if rs.iter().chain(&w).chain(&dw).any(|v| !v.is_finite()) {
            return Err(Error::Domain("profile contains non-finite values".into()));
        }
        Ok(Self { rs, w, dw, alpha, lambda, weight, tol })
    }

    pub fn len(&self) -> usize {
        self.rs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rs.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.rs[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.rs.last().expect("non-empty profile")
    }

    /// Checks negativity, monotonicity and the bound `w >= -alpha`.
    pub fn check_invariants(&self) -> Result<()> {
        let slack = 1e-12 * self.alpha.abs().max(1.0);
        for (i, (&r, (&w, &dw))) in self.rs.iter().zip(self.w.iter().zip(&self.dw)).enumerate() {
            if !(w < 0.0) {
                return Err(Error::Internal(format!("w({r}) = {w} is not negative")));
            }
            if w < -self.alpha - slack {
                return Err(Error::Internal(format!("w({r}) = {w} lies below -alpha = {}", -self.alpha)));
            }
            if r > 0.0 && !(dw > 0.0) {
                return Err(Error::Internal(format!("w'({r}) = {dw} is not positive")));
            }
            if i >= 2 && !(w > self.w[i - 1]) {
                return Err(Error::Internal(format!("w is not increasing at r = {r}")));
            }
        }
        Ok(())
    }

    fn interval(&self, r: f64) -> usize {
        match self.rs.binary_search_by(|x| x.partial_cmp(&r).expect("finite radius")) {
            Ok(i) => i.min(self.rs.len().saturating_sub(2)),
            Err(i) => i.saturating_sub(1).min(self.rs.len().saturating_sub(2)),
        }
    }

    /// Value of `w` and `w'` from the cubic Hermite interpolant.
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        if !(r >= self.r_min() && r <= self.r_max()) {
            return None;
        }
        if self.rs.len() == 1 {
            return Some((self.w[0], self.dw[0]));
        }
        let i = self.interval(r);
        let (r0, r1) = (self.rs[i], self.rs[i + 1]);
        let h = r1 - r0;
        let s = (r - r0) / h;
        let (y0, y1, m0, m1) = (self.w[i], self.w[i + 1], self.dw[i] * h, self.dw[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let w = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        let dw = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        Some((w, dw))
    }

    /// Samples the profile on `grid` intersected with its own range.
    pub fn resample(&self, grid: &[f64]) -> Result<RadialProfile> {
        let (lo, hi) = (self.r_min(), self.r_max());
        let mut rs = Vec::new();
        let mut w = Vec::new();
        let mut dw = Vec::new();
        for &r in grid.iter().filter(|&&r| r >= lo && r <= hi) {
            let (a, b) = self.eval(r).expect("inside range");
            rs.push(r);
            w.push(a);
            dw.push(b);
        }
        if rs.is_empty() {
            return Err(Error::Domain(format!("grid does not meet the profile range [{lo}, {hi}]")));
        }
        RadialProfile::new(rs, w, dw, self.alpha, self.lambda, self.weight, self.tol)
    }

    /// Builds a profile by sampling any curve at the given radii.
    pub fn sample<C: RadialCurve + ?Sized>(
        curve: &C,
        radii: &[f64],
        alpha: f64,
        lambda: f64,
        weight: WeightKind,
        tol: f64,
    ) -> Result<RadialProfile> {
        let mut w = Vec::with_capacity(radii.len());
        let mut dw = Vec::with_capacity(radii.len());
        for &r in radii {
            let (a, b) = curve
                .eval(r)
                .ok_or_else(|| Error::Domain(format!("radius {r} outside the curve's domain")))?;
            w.push(a);
            dw.push(b);
        }
        RadialProfile::new(radii.to_vec(), w, dw, alpha, lambda, weight, tol)
    }

    /// CSV with header `r,w,dw`, shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["r", "w", "dw"])?;
        for i in 0..self.len() {
            wr.write_record(&[fmt_f64(self.rs[i]), fmt_f64(self.w[i]), fmt_f64(self.dw[i])])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the `r,w,dw` columns; metadata is supplied by the caller.
    pub fn read_csv<R: Read>(input: R, alpha: f64, lambda: f64, weight: WeightKind, tol: f64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["r", "w", "dw"] {
            return Err(Error::Io(format!("expected header r,w,dw, found {:?}", headers)));
        }
        let (mut rs, mut w, mut dw) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Io("short CSV record".into()))?
                    .parse::<f64>()
                    .map_err(|e| Error::Io(e.to_string()))
            };
            rs.push(parse(0)?);
            w.push(parse(1)?);
            dw.push(parse(2)?);
        }
        Self::new(rs, w, dw, alpha, lambda, weight, tol)
    }

    /// JSON document with a metadata block and the three columns.
    pub fn to_json(&self, p: &ProblemParams) -> serde_json::Value {
        json!({
            "metadata": {
                "n": p.n,
                "k": p.k,
                "q": p.q,
                "mu": p.mu,
                "lambda": self.lambda,
                "alpha": self.alpha,
                "weight": self.weight.to_string(),
                "tol": self.tol,
            },
            "r": self.rs,
            "w": self.w,
            "dw": self.dw,
        })
    }
}

impl RadialCurve for RadialProfile {
    fn eval(&self, r: f64) -> Option<(f64, f64)> {
        RadialProfile::eval(self, r)
    }

    fn domain(&self) -> (f64, f64) {
        (self.r_min(), self.r_max())
    }

    fn nodes(&self) -> Vec<f64> {
        self.rs.clone()
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Geometric grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| if i + 1 == n { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() })
        .collect()
}
