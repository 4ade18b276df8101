use khessian::params::{lambda_star_lower_bound, q_jl, q_star, q_star_exact, ProblemParams, RegimeClass};
use khessian::phase::{classify, linearization, StabilityClass};
use num_rational::Rational64;
use proptest::prelude::*;

#[test]
fn jl_matches_laplacian_closed_form() {
    for n in 11..=40u32 {
        let nf = n as f64;
        let closed = 1.0 + 4.0 / (nf - 4.0 - 2.0 * (nf - 1.0).sqrt());
        assert!((q_jl(n, 1, 0.0).unwrap() - closed).abs() < 1e-12, "n = {n}");
    }
    assert_eq!(q_jl(10, 1, 0.0).unwrap(), f64::INFINITY);
}

#[test]
fn spiral_exactly_inside_the_window() {
    for (n, k) in [(11, 1), (13, 2), (24, 3)] {
        let p0 = ProblemParams::new(n, k, k as f64 + 2.0, 2.0).unwrap();
        let (qs, qj) = (p0.q_star(), p0.q_jl().unwrap());
        for i in 1..400 {
            let q = qs + (qj + 5.0 - qs) * i as f64 / 400.0;
            if (q - qj).abs() < 1e-6 * qj {
                continue;
            }
            let p = ProblemParams::new(n, k, q, 2.0).unwrap();
            let (eig, class) = classify(linearization(p.rho_minus(), p.x_hat(), p.y_hat(), &p));
            let complex = eig[0].im != 0.0;
            assert_eq!(complex, q < qj, "n = {n}, k = {k}, q = {q}");
            assert_eq!(complex, p.regime().class == RegimeClass::SpiralWindow);
            if complex {
                assert_eq!(class, StabilityClass::StableSpiral);
            }
        }
    }
}

#[test]
fn canonical_lower_bound() {
    let p = ProblemParams::new(11, 1, 3.0, 2.0).unwrap();
    assert!((lambda_star_lower_bound(&p) - 88.0 / 27.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn tso_below_jl(n in 3u32..80, k in 1u32..6, sn in 0i64..12, sd in 1i64..4) {
        prop_assume!(n > 2 * k);
        let sigma = Rational64::new(sn, sd);
        let sf = sn as f64 / sd as f64;
        let exact = q_star_exact(n, k, sigma).unwrap();
        let qs = q_star(n, k, sf).unwrap();
        prop_assert!((qs - *exact.numer() as f64 / *exact.denom() as f64).abs() < 1e-12 * qs);
        let qj = q_jl(n, k, sf).unwrap();
        prop_assert!(qs < qj);
    }

    #[test]
    fn regime_is_monotone_in_q(q1 in 1.05f64..30.0, q2 in 1.05f64..30.0) {
        let rank = |q: f64| ProblemParams::new(11, 1, q, 2.0).unwrap().regime().class as u8;
        let (a, b) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(rank(a) <= rank(b));
    }
}
