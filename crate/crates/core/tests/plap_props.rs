use std::sync::Arc;

use flatcore::mesh::{build_rect_mesh, ScalarField};
use flatcore::plap::{check_lemma_order, energy_j, grad_j, phi_p, pow_vec, AuxiliarySpec, Exponents};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn vec2() -> impl Strategy<Value = [f64; 2]> {
    [-10.0f64..10.0, -10.0f64..10.0]
}

fn close(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    let s = 1.0 + a[0].abs().max(a[1].abs());
    (a[0] - b[0]).abs() <= tol * s && (a[1] - b[1]).abs() <= tol * s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phi_identities(xi in vec2(), p in 1.05f64..5.0) {
        prop_assert!(close(phi_p(xi, xi, p), pow_vec(xi, p, 0.0), 1e-12));
        let zero = phi_p([0.0, 0.0], xi, p);
        prop_assert!(zero[0].abs() < 1e-12 * (1.0 + xi[0].abs()) && zero[1].abs() < 1e-12 * (1.0 + xi[1].abs()));
    }

    #[test]
    fn phi_is_monotone(eta in vec2(), eta_p in vec2(), xi in vec2(), p in 1.05f64..5.0) {
        let a = phi_p(eta, xi, p);
        let b = phi_p(eta_p, xi, p);
        let d = [eta[0] - eta_p[0], eta[1] - eta_p[1]];
        let ip = (a[0] - b[0]) * d[0] + (a[1] - b[1]) * d[1];
        let scale = (a[0].abs() + a[1].abs() + b[0].abs() + b[1].abs()) * (d[0].abs() + d[1].abs());
        prop_assert!(ip >= -1e-12 * scale);
    }

    #[test]
    fn order_lemma_holds(eta in vec2(), eta_p in vec2(), xi in vec2(), p in 1.01f64..5.0) {
        let r = check_lemma_order(eta, eta_p, xi, p);
        prop_assert!(r.pass, "{:?}", r);
    }
}

fn random_field(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-0.2..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gradient_matches_differences(seed in any::<u64>(), p in prop::sample::select(vec![1.5, 2.0, 3.0, 4.5]), theta in 0.2f64..2.0) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = Arc::new(build_rect_mesh(1.0, 1.0, 6, 6).unwrap());
        let a = ScalarField::from_fn(m.clone(), |x| 1.0 + 0.1 * x[0] - 0.05 * x[1]).unwrap();
        let mut spec = AuxiliarySpec::new(0.5, 1.0, Exponents::new(p, p.min(2.0), theta).unwrap()).unwrap();
        spec.sigma = 1e-3;
        let w = random_field(&mut r, m.n_vertices());
        let g = grad_j(&ScalarField::new(m.clone(), w.clone()).unwrap(), &a, &spec, 0.1).unwrap();
        let scale = g.values().iter().fold(0.0f64, |s, x| s.max(x.abs()));
        for i in (0..w.len()).filter(|&i| !m.is_boundary(i)) {
            let h = 1e-6;
            let j = |d: f64| {
                let mut x = w.clone();
                x[i] += d;
                energy_j(&ScalarField::new(m.clone(), x).unwrap(), &a, &spec, 0.1).unwrap()
            };
            let fd = (j(h) - j(-h)) / (2.0 * h);
            prop_assert!((g.values()[i] - fd).abs() <= 1e-6 * scale, "vertex {i}: {} vs {fd}", g.values()[i]);
        }
    }

    #[test]
    fn energy_is_convex_on_segments(seed in any::<u64>(), p in 1.2f64..5.0, theta in 0.2f64..2.0, lambda in 0.0f64..3.0) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = Arc::new(build_rect_mesh(1.0, 1.0, 6, 6).unwrap());
        let a = ScalarField::from_fn(m.clone(), |x| 1.0 + 0.2 * x[1]).unwrap();
        let mut spec = AuxiliarySpec::new(0.5, 1.0, Exponents::new(p, p.min(2.0), theta).unwrap()).unwrap();
        spec.lambda = lambda;
        spec.sigma = 1e-4;
        let w1 = random_field(&mut r, m.n_vertices());
        let w2 = random_field(&mut r, m.n_vertices());
        let j = |w: Vec<f64>| energy_j(&ScalarField::new(m.clone(), w).unwrap(), &a, &spec, 0.3).unwrap();
        let (j1, j2) = (j(w1.clone()), j(w2.clone()));
        for t in [0.25, 0.5, 0.75] {
            let mid: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            prop_assert!(j(mid) <= t * j1 + (1.0 - t) * j2 + 1e-10);
        }
    }
}
