use flatcore::oned::{richardson_difference, solve_1d, Oracle1DSpec};
use flatcore::plap::{Exponents, Nonlinearity};
use flatcore::solver::SolveConfig;
use proptest::prelude::*;

fn spec(p: f64, theta: f64, eps: f64, slope: f64, n: usize) -> Oracle1DSpec {
    let ex = Exponents::new(p, p.min(2.0), theta).unwrap();
    Oracle1DSpec::new(1.0, 1.0, slope, ex, Nonlinearity::new(theta, 1.0).unwrap(), eps, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn oracle_is_bounded_with_one_core(
        p in prop::sample::select(vec![1.5, 2.0, 3.0]),
        theta in prop::sample::select(vec![0.5, 1.5]),
        log_eps in -4.0f64..-2.0,
        slope in 0.05f64..0.4,
    ) {
        let s = spec(p, theta, 10f64.powf(log_eps), slope, 10_000);
        let sol = solve_1d(&s, &SolveConfig::default()).unwrap();
        for (i, &u) in sol.u.iter().enumerate() {
            prop_assert!(u >= -1e-12 && u <= s.a_at(sol.x[i]) + 1e-12);
        }
        prop_assert!(sol.core_components <= 1);
        prop_assert_eq!(sol.flat_core.is_some(), theta < 1.0);
    }
}

#[test]
fn grid_doubling_is_consistent() {
    let cfg = SolveConfig::default();
    for (theta, eps) in [(0.5, 1e-2), (1.5, 1e-2), (0.5, 1e-3)] {
        let d = richardson_difference(&spec(2.0, theta, eps, 0.1, 20_000), &cfg).unwrap();
        assert!(d <= 1e-6, "theta {theta} eps {eps}: {d:e}");
    }
}
