use khessian::params::ProblemParams;
use khessian::radial::{
    integral_residual, integrate_ivp, maximal_solution, picard_oracle, solve_ivp, IvpOptions, MaximalStatus, WeightKind,
};
use khessian::Error;
use proptest::prelude::*;

fn canonical() -> ProblemParams {
    ProblemParams::new(11, 1, 3.0, 2.0).unwrap()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn fixed_step_order_is_five() {
    let p = canonical().with_lambda(8.0).unwrap();
    for wk in [WeightKind::matukuma(2.0), WeightKind::power(2.0)] {
        let exact = *picard_oracle(&p, wk, 1.0, 1.0, 1e-12).unwrap().w.last().unwrap();
        let hs = [0.05, 0.025, 0.0125];
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                // a loose tolerance so every step has length h
                let opts = IvpOptions { r0: Some(1e-6), h_max: h, ..IvpOptions::default() };
                let sol = solve_ivp(&p, wk, 1.0, 1.0, 0.5, &opts).unwrap();
                (sol.endpoint().0 - exact).abs()
            })
            .collect();
        let order = slope(&hs.map(f64::ln), &errs.iter().map(|e| e.ln()).collect::<Vec<_>>());
        assert!((order - 5.0).abs() < 0.5, "{wk:?}: errors {errs:?}, order {order}");
    }
}

#[test]
fn deeper_start_stays_deeper() {
    let p = canonical().with_lambda(5.0).unwrap();
    let sols: Vec<_> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&a| solve_ivp(&p, WeightKind::matukuma(2.0), a, 1.0, 1e-10, &IvpOptions::default()).unwrap())
        .collect();
    for r in [0.25, 0.5, 1.0] {
        let w: Vec<f64> = sols.iter().map(|s| s.eval(r).unwrap().0).collect();
        assert!(w.windows(2).all(|v| v[1] < v[0]), "r = {r}: {w:?}");
    }
}

#[test]
fn power_weight_scaling_identity() {
    let p = canonical().with_lambda(5.0).unwrap();
    let wk = WeightKind::power(2.0);
    let g = p.gamma();
    let one = solve_ivp(&p, wk, 1.0, 8f64.powf(g), 1e-12, &IvpOptions::default()).unwrap();
    for alpha in [2.0, 4.0, 8.0] {
        let sol = solve_ivp(&p, wk, alpha, 1.0, 1e-12, &IvpOptions::default()).unwrap();
        for r in [0.1, 0.25, 0.5, 1.0] {
            let direct = sol.eval(r).unwrap().0;
            let scaled = alpha * one.eval(alpha.powf(g) * r).unwrap().0;
            assert!((direct - scaled).abs() < 1e-8 * direct.abs(), "alpha {alpha}, r {r}: {direct} vs {scaled}");
        }
    }
}

#[test]
fn start_radius_does_not_matter() {
    let p = canonical().with_lambda(9.0).unwrap();
    let wk = WeightKind::matukuma(2.0);
    let a = solve_ivp(&p, wk, 3.0, 1.0, 1e-10, &IvpOptions::default()).unwrap();
    let r0 = a.r0;
    let b = solve_ivp(&p, wk, 3.0, 1.0, 1e-10, &IvpOptions { r0: Some(0.5 * r0), ..IvpOptions::default() }).unwrap();
    assert!((a.endpoint().0 - b.endpoint().0).abs() < 1e-9);
}

#[test]
fn stepper_agrees_with_oracle() {
    let p = canonical().with_lambda(11.0).unwrap();
    for wk in [WeightKind::matukuma(2.0), WeightKind::power(2.0)] {
        let a = integrate_ivp(&p, wk, 10.0, 1.0, 1e-10).unwrap();
        let b = picard_oracle(&p, wk, 10.0, 1.0, 1e-10).unwrap();
        for &r in a.rs.iter().step_by(7) {
            assert!((a.eval(r).unwrap().0 - b.eval(r).unwrap().0).abs() < 1e-8);
        }
    }
}

#[test]
fn maximal_solution_is_a_fixed_point() {
    let p = canonical().with_lambda(4.0).unwrap();
    let m = maximal_solution(&p, 1e-10, 20_000).unwrap();
    assert_eq!(m.status, MaximalStatus::Converged);
    assert!(m.fixed_point_defect() < 1e-9);
    assert!(m.u.iter().all(|&u| u <= 0.0));
    let prof = m.profile.as_ref().unwrap();
    assert!(integral_residual(prof, &p, WeightKind::matukuma(2.0)).unwrap() < 1e-6);
    assert!((prof.w.last().unwrap() + 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn profiles_satisfy_invariants(alpha in 0.5f64..50.0, lambda in 1.0f64..20.0, power in any::<bool>()) {
        let p = canonical().with_lambda(lambda).unwrap();
        let wk = if power { WeightKind::power(2.0) } else { WeightKind::matukuma(2.0) };
        match integrate_ivp(&p, wk, alpha, 1.0, 1e-10) {
            Ok(prof) => {
                prop_assert!(prof.check_invariants().is_ok());
                prop_assert!((prof.eval(prof.r_min()).unwrap().0 + alpha).abs() < 1e-6 * alpha);
                prop_assert!(integral_residual(&prof, &p, wk).unwrap() < 1e-6);
            }
            Err(Error::ZeroCrossing { radius }) => prop_assert!(radius > 0.0 && radius < 1.0),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
