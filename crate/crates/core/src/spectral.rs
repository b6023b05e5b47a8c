//! First Dirichlet eigenpair of the p-Laplacian and the weighted eigenvalue
//! that fixes the existence threshold `ε_a`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{field::grad_on, Mesh, ScalarField};
use crate::par;
use crate::plap::{self, AuxiliarySpec, Exponents};
use crate::solver::minimize::{minimize, FieldEnergy, NewtonOptions};
use crate::sparse::Pattern;

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Eigenfunction with `max z = 1`.
    pub z: ScalarField,
    pub rayleigh_history: Vec<f64>,
    /// Euler-Lagrange residual `max_i |r_i| / m_i` of the returned pair.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { rel_tol: 1e-11, max_iter: 500 }
    }
}

/// Discrete `∫ ω |z|^p` with the lumped mass.
fn weighted_lp(m: &Mesh, z: &[f64], w: &[f64], p: f64) -> f64 {
    let mass = m.lumped_mass();
    par::sum(z.len(), |i| mass[i] * w[i] * z[i].abs().powf(p))
}

fn dirichlet_p(m: &Mesh, z: &[f64], p: f64) -> f64 {
    par::sum(m.n_triangles(), |t| {
        let g = grad_on(m, z, t);
        m.area(t) * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
    })
}

/// `∫|∇z|^p / ∫ ω|z|^p` on the mesh.
pub fn rayleigh_quotient(m: &Mesh, z: &[f64], weight: &[f64], p: f64) -> f64 {
    dirichlet_p(m, z, p) / weighted_lp(m, z, weight, p)
}

/// First eigenpair of `-Δ_p z = λ|z|^{p-2}z` with zero boundary values.
pub fn first_eigenpair(mesh: &Arc<Mesh>, p: f64) -> Result<EigenResult> {
    let ones = vec![1.0; mesh.n_vertices()];
    eigen_impl(mesh, p, &ones, &EigenOptions::default())
}

pub fn first_eigenpair_with(mesh: &Arc<Mesh>, p: f64, opts: &EigenOptions) -> Result<EigenResult> {
    let ones = vec![1.0; mesh.n_vertices()];
    eigen_impl(mesh, p, &ones, opts)
}

/// `λ_ω = inf ∫|∇u|^p / ∫ ω|u|^p` over the discrete space.
pub fn weighted_first_eigenvalue(mesh: &Arc<Mesh>, p: f64, weight: &ScalarField) -> Result<f64> {
    if !Arc::ptr_eq(mesh, weight.mesh()) && !mesh.same_as(weight.mesh()) {
        return Err(Error::invalid("weight lives on a different mesh"));
    }
    if let Some(i) = weight.values().iter().position(|&w| !(w > 0.0)) {
        return Err(Error::invalid(format!("weight must be positive, vertex {i} has {}", weight.values()[i])));
    }
    Ok(eigen_impl(mesh, p, weight.values(), &EigenOptions::default())?.lambda1)
}

/// Nonlinear inverse iteration: `w` minimizes `(1/p)∫|∇w|^p - ∫ω z^{p-1} w`,
/// then `z ← w / ‖w‖_{L^p_ω}`. Each step decreases the Rayleigh quotient.
fn eigen_impl(mesh: &Arc<Mesh>, p: f64, weight: &[f64], opts: &EigenOptions) -> Result<EigenResult> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("p must exceed 1, got {p}")));
    }
    let m = &**mesh;
    let n = m.n_vertices();
    let free: Vec<bool> = (0..n).map(|i| !m.is_boundary(i)).collect();
    if !free.iter().any(|&f| f) {
        return Err(Error::invalid("mesh has no interior vertices"));
    }
    let pattern = Pattern::new(m);
    let zeros = vec![0.0; n];
    let spec = AuxiliarySpec {
        delta: 0.5,
        lambda: 0.0,
        exponents: Exponents { p, q: p, theta: 1.0 },
        sigma: 0.0,
        mu: plap::default_mu(p),
    };
    let normalize = |z: &mut Vec<f64>| {
        let s = weighted_lp(m, z, weight, p).powf(1.0 / p);
        z.iter_mut().for_each(|v| *v /= s);
    };
    let mut z: Vec<f64> = m.distances().to_vec();
    normalize(&mut z);
    let mut lambda = rayleigh_quotient(m, &z, weight, p);
    let mut history = vec![lambda];
    let mass = m.lumped_mass();
    let newton = NewtonOptions { tol: 1e-11, max_iter: 100, ..Default::default() };
    let mut converged = false;
    let mut last_change = 1.0f64;
    // For p < 2 the first solves start far from the minimizer, where the
    // singular coefficient stalls Newton; μ comes down one decade per step.
    let mut mu = if p < 2.0 { 0.1f64.max(spec.mu) } else { spec.mu };
    for _ in 0..opts.max_iter {
        let spec = AuxiliarySpec { mu, ..spec };
        let rhs: Vec<f64> = (0..n).map(|i| weight[i] * z[i].abs().powf(p - 1.0)).collect();
        let energy = FieldEnergy {
            mesh: m,
            pattern: &pattern,
            a: &zeros,
            spec,
            eps: 1.0,
            quad: Some((0.0, &rhs)),
        };
        // At the fixed point w = λ^{-1/(p-1)} z.
        let x0: Vec<f64> = z.iter().map(|v| v * lambda.powf(-1.0 / (p - 1.0))).collect();
        let scale = rhs.iter().zip(mass).map(|(r, _)| r.abs()).fold(0.0, f64::max).max(1e-300);
        // Inexact inner solves while λ is still moving; the floor is the
        // final accuracy.
        let inner = (1e-2 * last_change).clamp(newton.tol, 1e-4);
        let out = minimize(&energy, x0, &free, mass, &NewtonOptions { tol: inner * scale, ..newton.clone() });
        let mut w = out.x;
        if w.iter().any(|v| *v < 0.0) {
            w.iter_mut().for_each(|v| *v = v.abs());
        }
        normalize(&mut w);
        let new_lambda = rayleigh_quotient(m, &w, weight, p);
        history.push(new_lambda);
        let change = (lambda - new_lambda).abs() / new_lambda;
        z = w;
        lambda = new_lambda;
        last_change = change;
        let final_mu = mu <= plap::default_mu(p);
        mu = (0.1 * mu).max(plap::default_mu(p));
        if change < opts.rel_tol && inner <= newton.tol && final_mu {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::no_convergence(
            format!("inverse iteration stalled, Rayleigh history tail {:?}", &history[history.len().saturating_sub(3)..]),
            Some(z),
        ));
    }
    let zmax = z.iter().copied().fold(0.0, f64::max);
    z.iter_mut().for_each(|v| *v /= zmax);
    let lambda = rayleigh_quotient(m, &z, weight, p);
    let residual = euler_lagrange_residual(m, &z, weight, p, lambda);
    Ok(EigenResult { lambda1: lambda, z: ScalarField::new(mesh.clone(), z)?, rayleigh_history: history, residual })
}

fn euler_lagrange_residual(m: &Mesh, z: &[f64], weight: &[f64], p: f64, lambda: f64) -> f64 {
    let mut r = vec![0.0; z.len()];
    for t in 0..m.n_triangles() {
        let flux = plap::pow_vec(grad_on(m, z, t), p, 0.0);
        let hg = m.hat_gradients(t);
        let tri = m.triangles()[t];
        for i in 0..3 {
            r[tri[i]] += m.area(t) * (flux[0] * hg[i][0] + flux[1] * hg[i][1]);
        }
    }
    let mass = m.lumped_mass();
    (0..z.len())
        .filter(|&i| !m.is_boundary(i))
        .map(|i| ((r[i] - lambda * mass[i] * weight[i] * z[i].abs().powf(p - 2.0) * z[i]) / mass[i]).abs())
        .fold(0.0, f64::max)
}

/// `ε_a`: infinite for `p > q`, `1/λ_{f(a)}` for `p = q`.
pub fn eps_threshold(p: f64, q: f64, lambda_fa: f64) -> Result<f64> {
    if p < q {
        return Err(Error::invalid(format!("need p >= q, got p = {p}, q = {q}")));
    }
    if p > q {
        return Ok(f64::INFINITY);
    }
    if !(lambda_fa > 0.0) {
        return Err(Error::invalid(format!("eigenvalue must be positive, got {lambda_fa}")));
    }
    Ok(1.0 / lambda_fa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;

    #[test]
    fn threshold_examples() {
        assert_eq!(eps_threshold(3.0, 2.0, 1.0).unwrap(), f64::INFINITY);
        assert!((eps_threshold(2.0, 2.0, 5.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(eps_threshold(2.0, 2.0, 1e300).unwrap() < 1e-299);
        assert!(eps_threshold(2.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn coarse_square_p2() {
        let m = Arc::new(build_rect_mesh(1.0, 1.0, 16, 16).unwrap());
        let e = first_eigenpair(&m, 2.0).unwrap();
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        assert!((e.lambda1 - exact).abs() < 0.05 * exact, "{}", e.lambda1);
        assert!((e.z.max() - 1.0).abs() < 1e-15);
        assert!(e.z.min() >= 0.0);
        assert!(e.rayleigh_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let q = rayleigh_quotient(&m, e.z.values(), &vec![1.0; m.n_vertices()], 2.0);
        assert!((q - e.lambda1).abs() < 1e-8 * e.lambda1);
    }

    #[test]
    fn weight_checks() {
        let m = Arc::new(build_rect_mesh(1.0, 1.0, 6, 6).unwrap());
        let bad = ScalarField::constant(m.clone(), 0.0);
        assert!(weighted_first_eigenvalue(&m, 2.0, &bad).is_err());
        let base = first_eigenpair(&m, 2.5).unwrap().lambda1;
        let c = ScalarField::constant(m.clone(), 4.0);
        let l = weighted_first_eigenvalue(&m, 2.5, &c).unwrap();
        assert!((l - base / 4.0).abs() < 1e-8 * base);
    }
}
