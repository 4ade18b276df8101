//! Defect of the integral identity
//! `c r^(n-k) (w')^k = lambda ∫_0^r s^(n-1) h(s) (-w)^q ds`.

use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::quadrature::gauss;

use super::{RadialProfile, WeightKind};

/// Sup over the profile nodes in `(0, r_max]` of the identity defect, relative
/// to `max(1, c r^(n-k) (w')^k)`.
pub fn integral_residual(prof: &RadialProfile, p: &ProblemParams, wk: WeightKind) -> Result<f64> {
    integral_residual_on(prof, p, wk, 0.0, f64::INFINITY)
}

/// As [`integral_residual`], restricted to nodes in `[r_lo, r_hi]`.
pub fn integral_residual_on(prof: &RadialProfile, p: &ProblemParams, wk: WeightKind, r_lo: f64, r_hi: f64) -> Result<f64> {
    if prof.len() < 2 {
        return Err(Error::Domain("residual needs at least two nodes".into()));
    }
    let lambda = prof.lambda;
    let (n, k, q, c) = (p.nf(), p.kf(), p.q, p.c_nk());
    let gl = gauss(8)?;
    let integrand = |s: f64| -> f64 {
        let w = prof.eval(s).map_or(0.0, |v| v.0);
        s.powf(n - 1.0) * wk.h(s) * (-w).max(0.0).powf(q)
    };

    // Mass on [0, r_first] from a power-law fit of the integrand.
    let rs = &prof.rs;
    let mut acc = if rs[0] > 0.0 {
        let (f0, f1) = (integrand(rs[0]), integrand(rs[1]));
        let expo = (f1 / f0).ln() / (rs[1] / rs[0]).ln();
        if !(expo > -1.0) || !expo.is_finite() {
            return Err(Error::Domain(format!("integrand is not integrable at the origin (local power {expo})")));
        }
        f0 * rs[0] / (expo + 1.0)
    } else {
        0.0
    };

    let mut worst: f64 = 0.0;
    for i in 0..rs.len() {
        if i > 0 {
            acc += gl.integrate(rs[i - 1], rs[i], integrand);
        }
        let r = rs[i];
        if r == 0.0 || r < r_lo || r > r_hi {
            continue;
        }
        let lhs = c * r.powf(n - k) * prof.dw[i].max(0.0).powf(k);
        let rhs = lambda * acc;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::integrate_ivp;

    #[test]
    fn stepper_output_has_small_residual_and_tampering_is_detected() {
        let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap().with_lambda(4.0).unwrap();
        let wk = WeightKind::matukuma(2.0);
        let prof = integrate_ivp(&p, wk, 3.0, 1.0, 1e-10).unwrap();
        let res = integral_residual(&prof, &p, wk).unwrap();
        assert!(res < 1e-7, "{res:e}");

        let mut bad = prof.clone();
        let half = bad.len() / 2;
        for v in bad.w[half..].iter_mut() {
            *v += 1e-3;
        }
        assert!(integral_residual(&bad, &p, wk).unwrap() > 1e-5);
    }
}
