//! Quadrature on uniform grids starting at the origin.
//!
//! [`ProductRule`] integrates `s^m g(s)` with `g` smooth by integrating the
//! quadratic interpolant of `g` against the exact weight `s^m`. Near the
//! origin this keeps full accuracy even though `s^m` is not smooth there
//! (non-integer `m`) or varies over many decades inside the first panels.

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Panels at `s0/h` beyond this use plain Simpson on the product `s^m g`.
const GAUSS_PANEL_LIMIT: usize = 2048;
const GAUSS_DEGREE: usize = 20;

pub(crate) fn gauss(deg: usize) -> Result<GaussLegendre> {
    GaussLegendre::new(deg).map_err(|e| Error::Internal(format!("Gauss-Legendre rule: {e}")))
}

fn lagrange(tau: f64) -> [f64; 3] {
    [0.5 * (tau - 1.0) * (tau - 2.0), -tau * (tau - 2.0), 0.5 * tau * (tau - 1.0)]
}

/// Weights of `∫ s^m g(s) ds` over panels `[2jh, (2j+2)h]` of a uniform grid.
#[derive(Debug, Clone)]
pub struct ProductRule {
    h: f64,
    m: f64,
    full: Vec<[f64; 3]>,
    half: Vec<[f64; 3]>,
}

impl ProductRule {
    pub fn new(h: f64, m: f64) -> Result<Self> {
        if !(h > 0.0) || !(m > -1.0) {
            return Err(Error::Parameter(format!("product rule needs h > 0 and m > -1 (h = {h}, m = {m})")));
        }
        let gl = gauss(GAUSS_DEGREE)?;
        let mut full = Vec::with_capacity(GAUSS_PANEL_LIMIT);
        let mut half = Vec::with_capacity(GAUSS_PANEL_LIMIT);

        // First panel: moments of tau^m in closed form.
        let mom = |b: f64, p: f64| b.powf(m + p + 1.0) / (m + p + 1.0);
        let scale = h.powf(m + 1.0);
        let first = |b: f64| {
            let (m0, m1, m2) = (mom(b, 0.0), mom(b, 1.0), mom(b, 2.0));
            [
                scale * 0.5 * (m2 - 3.0 * m1 + 2.0 * m0),
                scale * (-m2 + 2.0 * m1),
                scale * 0.5 * (m2 - m1),
            ]
        };
        full.push(first(2.0));
        half.push(first(1.0));

        for j in 1..GAUSS_PANEL_LIMIT {
            let a = 2.0 * j as f64;
            let over = |b: f64| -> [f64; 3] {
                std::array::from_fn(|i| {
                    h * gl.integrate(0.0, b, |tau| (h * (a + tau)).powf(m) * lagrange(tau)[i])
                })
            };
            full.push(over(2.0));
            half.push(over(1.0));
        }
        Ok(Self { h, m, full, half })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Weights on the three panel nodes for the whole panel `j`.
    pub fn full(&self, j: usize) -> [f64; 3] {
        match self.full.get(j) {
            Some(w) => *w,
            None => {
                let s0 = 2.0 * j as f64 * self.h;
                let c = self.h / 3.0;
                [c * s0.powf(self.m), 4.0 * c * (s0 + self.h).powf(self.m), c * (s0 + 2.0 * self.h).powf(self.m)]
            }
        }
    }

    /// Weights on the three panel nodes for the first half of panel `j`.
    pub fn half(&self, j: usize) -> [f64; 3] {
        match self.half.get(j) {
            Some(w) => *w,
            None => {
                let s0 = 2.0 * j as f64 * self.h;
                let c = self.h / 12.0;
                [
                    5.0 * c * s0.powf(self.m),
                    8.0 * c * (s0 + self.h).powf(self.m),
                    -c * (s0 + 2.0 * self.h).powf(self.m),
                ]
            }
        }
    }
}

/// Running integral of samples `f` on a uniform grid (Simpson on panel pairs,
/// the three-point half-panel rule at odd nodes). `f.len()` must be odd.
pub fn cumulative_simpson(f: &[f64], h: f64, start: f64) -> Vec<f64> {
    let mut out = vec![start; f.len()];
    let mut acc = start;
    let mut i = 0;
    while i + 2 < f.len() {
        out[i + 1] = acc + h / 12.0 * (5.0 * f[i] + 8.0 * f[i + 1] - f[i + 2]);
        acc += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
        out[i + 2] = acc;
        i += 2;
    }
    out
}
