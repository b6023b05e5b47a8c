use std::sync::Arc;

use flatcore::deadcore::{detect_coincidence_gap, energy_profile, exponents_degenerate, exponents_nondegenerate};
use flatcore::experiments::AuxSetup;
use flatcore::mesh::{build_disk_mesh, build_rect_mesh, ScalarField};
use flatcore::plap::{AuxiliarySpec, Exponents};
use flatcore::solver::SolveConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn identities_hold(theta in 0.01f64..0.99, n in 2usize..9) {
        let e = exponents_nondegenerate(theta, n).unwrap();
        prop_assert!((e.tau - (1.0 + 2.0 * e.alpha * e.beta)).abs() < 1e-12);
        prop_assert!(e.identity_defect() < 1e-12);
    }

    #[test]
    fn degenerate_identities_hold(p in 1.1f64..6.0, frac in 0.01f64..0.99, n in 2usize..9) {
        let theta = frac * (p - 1.0);
        let e = exponents_degenerate(theta, n, p).unwrap();
        let ps = p / (p - 1.0);
        prop_assert!((e.tau - (1.0 + ps * e.alpha * e.beta)).abs() < 1e-12 * e.tau.max(1.0));
    }

    #[test]
    fn p2_reduction(theta in 0.01f64..0.99, n in 2usize..9) {
        let a = exponents_nondegenerate(theta, n).unwrap();
        let b = exponents_degenerate(theta, n, 2.0).unwrap();
        prop_assert!((a.gamma - b.gamma).abs() < 1e-14);
        prop_assert!((a.tau - b.tau).abs() < 1e-13);
        prop_assert!((a.alpha - b.alpha).abs() < 1e-14);
        prop_assert!((a.beta - b.beta).abs() < 1e-14);
    }

    #[test]
    fn mask_grows_with_tolerance(seed in any::<u64>(), t1 in 0.0f64..0.5, t2 in 0.0f64..0.5) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = Arc::new(build_rect_mesh(1.0, 1.0, 10, 10).unwrap());
        let g: Vec<f64> = (0..m.n_vertices()).map(|_| r.gen_range(0.0..0.6)).collect();
        let gap = ScalarField::new(m, g).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = detect_coincidence_gap(&gap, lo).unwrap();
        let b = detect_coincidence_gap(&gap, hi).unwrap();
        prop_assert!(a.mask.iter().zip(&b.mask).all(|(x, y)| !x || *y));
        prop_assert!(a.measure <= b.measure && a.width >= b.width);
    }

    #[test]
    fn profiles_are_monotone_and_additive(seed in any::<u64>(), theta in 0.2f64..2.0, lambda in 0.1f64..3.0) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = Arc::new(build_disk_mesh(8, 6).unwrap());
        let w = ScalarField::new(m.clone(), (0..m.n_vertices()).map(|_| r.gen_range(0.0..0.1)).collect()).unwrap();
        let a = ScalarField::from_fn(m.clone(), |x| 1.0 + 0.05 * x[0]).unwrap();
        let spec = AuxiliarySpec::new(0.1, lambda, Exponents::new(2.0, 2.0, theta).unwrap()).unwrap();
        let prof = energy_profile(&w, &a, &spec, 8).unwrap();
        for k in 0..prof.rho.len() {
            prop_assert_eq!(prof.e_t[k], prof.e_d[k] + lambda * prof.e_a[k]);
            if k > 0 {
                prop_assert!(prof.e_d[k] >= prof.e_d[k - 1] && prof.e_a[k] >= prof.e_a[k - 1] && prof.e_t[k] >= prof.e_t[k - 1]);
            }
        }
    }
}

#[test]
fn dead_core_radius_shrinks_as_delta_grows() {
    let setup = AuxSetup { rings: 16, ..AuxSetup::default() };
    let mesh = setup.mesh().unwrap();
    let cfg = SolveConfig::default();
    let radii: Vec<f64> = [1e-4, 1e-3, 3e-3, 1e-2, 3e-2].iter().map(|&d| setup.run(&mesh, 0.5, d, &cfg).radius).collect();
    assert!(radii.windows(2).all(|w| w[1] <= w[0]), "{radii:?}");
    assert!(radii[0] > 0.5 && *radii.last().unwrap() == 0.0, "{radii:?}");
}

#[test]
fn auxiliary_solutions_respect_bounds() {
    let setup = AuxSetup { rings: 12, ..AuxSetup::default() };
    let mesh = setup.mesh().unwrap();
    for theta in [0.3, 0.5, 1.0, 1.5] {
        for delta in [1e-1, 1e-2, 1e-3] {
            let r = setup.run(&mesh, theta, delta, &SolveConfig::default());
            // P1 on the disk has no discrete maximum principle; the undershoot
            // below 0 is O(h^2 δ) here and about 1e-4 δ at 48 rings.
            assert!(r.bounds_hold(setup.h().powi(2)), "theta {theta} delta {delta}: {r:?}");
        }
    }
}
