use std::sync::Arc;

use flatcore::mesh::build_rect_mesh;
use flatcore::spectral::{first_eigenpair, rayleigh_quotient};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn eigenfunction_is_normalized(p in 1.5f64..4.0, lx in 0.5f64..2.0) {
        let m = Arc::new(build_rect_mesh(lx, 1.0, 12, 12).unwrap());
        let e = first_eigenpair(&m, p).unwrap();
        let z = e.z.values();
        prop_assert!(z.iter().all(|&v| v >= 0.0));
        prop_assert!((e.z.max() - 1.0).abs() < 1e-14);
        let ones = vec![1.0; z.len()];
        let rq = rayleigh_quotient(&m, z, &ones, p);
        prop_assert!((rq / e.lambda1 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nested_rectangles_order_eigenvalues(p in 1.5f64..4.0, grow in 1.1f64..2.0) {
        // Same spacing on both meshes, so the smaller mesh is a subset.
        let n = 10;
        let small = Arc::new(build_rect_mesh(1.0, 1.0, n, n).unwrap());
        let m2 = (n as f64 * grow).round() as usize;
        let big = Arc::new(build_rect_mesh(m2 as f64 / n as f64, 1.0, m2, n).unwrap());
        let ls = first_eigenpair(&small, p).unwrap().lambda1;
        let lb = first_eigenpair(&big, p).unwrap().lambda1;
        prop_assert!(ls >= lb * (1.0 - 1e-9), "{ls} < {lb}");
    }

    #[test]
    fn dilation_homogeneity(p in 1.5f64..4.0, r in 0.5f64..3.0) {
        let base = build_rect_mesh(1.0, 1.0, 12, 12).unwrap();
        let scaled = Arc::new(base.scaled(r).unwrap());
        let l1 = first_eigenpair(&Arc::new(base), p).unwrap().lambda1;
        let l2 = first_eigenpair(&scaled, p).unwrap().lambda1;
        prop_assert!((l2 * r.powf(p) / l1 - 1.0).abs() < 1e-6);
    }
}
