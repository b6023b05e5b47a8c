use std::sync::Arc;

use flatcore::mesh::build_rect_mesh;
use flatcore::plap::{Exponents, Nonlinearity};
use flatcore::solver::{solve_main, ProblemSpec, SolveConfig};
use proptest::prelude::*;

fn spec(n: usize, p: f64, theta: f64, eps: f64, slope: [f64; 2]) -> ProblemSpec {
    let m = Arc::new(build_rect_mesh(1.0, 1.0, n, n).unwrap());
    let q = p.min(2.0);
    ProblemSpec::new(m, 1.0, slope, Exponents::new(p, q, theta).unwrap(), Nonlinearity::new(theta, 1.0).unwrap(), eps, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solves_are_monotone_and_bounded(
        p in prop::sample::select(vec![1.5, 2.0, 3.0]),
        theta in prop::sample::select(vec![0.5, 1.0, 1.5]),
        log_eps in -3.5f64..-1.5,
        sx in 0.05f64..0.3,
    ) {
        let s = spec(12, p, theta, 10f64.powf(log_eps), [sx, 0.0]);
        let cfg = SolveConfig { lambda_fa: Some(19.0), ..Default::default() };
        let sol = solve_main(&s, &cfg).unwrap();
        prop_assert!(sol.report.final_residual <= cfg.accept_tol);
        prop_assert_eq!(sol.report.monotonicity_violations, 0);
        let a = s.a.values();
        for (i, &u) in sol.u.values().iter().enumerate() {
            prop_assert!(u >= -1e-12 && u <= a[i] + 1e-12, "vertex {i}: u {u} a {}", a[i]);
        }
        let e = &sol.report.energy_history;
        prop_assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
    }
}

/// Smaller ε gives a larger solution. Reported per vertex when it fails.
#[test]
fn ordering_in_eps() {
    let cfg = SolveConfig { lambda_fa: Some(19.0), ..Default::default() };
    let eps = [1e-2, 3e-3, 1e-3];
    let sols: Vec<_> = eps.iter().map(|&e| solve_main(&spec(16, 2.0, 0.5, e, [0.1, 0.0]), &cfg).unwrap()).collect();
    for k in 1..sols.len() {
        let (big, small) = (sols[k - 1].u.values(), sols[k].u.values());
        let worst = big.iter().zip(small).map(|(b, s)| b - s).fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-6, "u at eps {} exceeds u at eps {} by {worst:e}", eps[k - 1], eps[k]);
    }
}
