//! Shifted Newton iteration for smooth convex functionals of P1 fields.

use crate::mesh::Mesh;
use crate::par;
use crate::plap::{self, AuxiliarySpec};
use crate::sparse::{pcg, Csr, Pattern};

pub(crate) trait Objective: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> Csr;
}

#[derive(Clone, Debug)]
pub(crate) struct NewtonOptions {
    /// Stop when `max_i |g_i| / m_i` over free vertices drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub cg_rtol: f64,
    pub cg_max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-9, max_iter: 200, cg_rtol: 1e-10, cg_max_iter: 20_000 }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub energy: Vec<f64>,
}

pub(crate) fn strong_norm(g: &[f64], mass: &[f64], free: &[bool]) -> f64 {
    par::max(g.len(), |i| if free[i] { (g[i] / mass[i]).abs() } else { 0.0 }).max(0.0)
}

/// Minimize `obj` over fields that agree with `x0` on fixed vertices.
///
/// Each step solves `(H + s M) d = -g` with the lumped mass `M`. The shift
/// `s` shrinks after a full step and grows after a rejected one, so the
/// iteration moves between Newton and scaled gradient descent. A step is
/// accepted on an Armijo decrease, or, once energy differences fall below
/// rounding, on a decrease of the gradient norm.
pub(crate) fn minimize<O: Objective>(
    obj: &O,
    x0: Vec<f64>,
    free: &[bool],
    mass: &[f64],
    opts: &NewtonOptions,
) -> NewtonOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut e = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut gn = strong_norm(&g, mass, free);
    let mut energy = vec![e];
    let mut shift = 0.0f64;
    let mut shift_floor = 0.0f64;
    let mut it = 0;
    while it < opts.max_iter {
        if gn <= opts.tol {
            return NewtonOutcome { x, iterations: it, grad_norm: gn, converged: true, energy };
        }
        it += 1;
        let h = obj.hessian(&x);
        let mut accepted = false;
        for _attempt in 0..30 {
            let mut hs = h.clone();
            if shift > 0.0 {
                hs.add_diag(mass, shift);
            }
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let cg = pcg(&hs, &rhs, free, opts.cg_rtol, opts.cg_max_iter);
            if cg.negative_curvature {
                shift = (shift * 10.0).max(gn.max(1e-8));
                shift_floor = shift_floor.max(shift * 0.1);
                continue;
            }
            let d = cg.x;
            let slope = par::dot(&g, &d);
            if !(slope < 0.0) {
                shift = (shift * 10.0).max(gn.max(1e-8));
                continue;
            }
            let mut t = 1.0;
            for _ in 0..12 {
                let xt: Vec<f64> = (0..n).map(|i| x[i] + t * d[i]).collect();
                let et = obj.value(&xt);
                let armijo = et <= e + 1e-4 * t * slope;
                let flat = et <= e + 1e-13 * e.abs().max(1e-300);
                let (gt, gnt) = if armijo || flat {
                    let gt = obj.gradient(&xt);
                    let gnt = strong_norm(&gt, mass, free);
                    (gt, gnt)
                } else {
                    (Vec::new(), f64::INFINITY)
                };
                if armijo || (flat && gnt < gn) {
                    x = xt;
                    e = et.min(e);
                    g = gt;
                    gn = gnt;
                    energy.push(e);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                if t == 1.0 {
                    shift = if shift < 1e-12 { shift_floor } else { (shift * 0.1).max(shift_floor) };
                }
                break;
            }
            shift = (shift * 10.0).max(gn.max(1e-8));
        }
        if !accepted {
            break;
        }
    }
    let converged = gn <= opts.tol;
    NewtonOutcome { x, iterations: it, grad_norm: gn, converged, energy }
}

/// `ε Σ_T |T| [W_μ(∇v - ∇a) + ∇_p a·∇v] + Λ∫ψ_σ(v) + Σ_i m_i (α v_i²/2 - r_i v_i)`.
///
/// The absorption uses the edge-midpoint rule; the quadratic part uses the
/// lumped mass. Either may be absent.
pub(crate) struct FieldEnergy<'a> {
    pub mesh: &'a Mesh,
    pub pattern: &'a Pattern,
    pub a: &'a [f64],
    pub spec: AuxiliarySpec,
    pub eps: f64,
    pub quad: Option<(f64, &'a [f64])>,
}

impl Objective for FieldEnergy<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let mut e = plap::energy_j_raw(self.mesh, x, self.a, &self.spec, self.eps);
        if let Some((alpha, r)) = self.quad {
            let m = self.mesh.lumped_mass();
            e += par::sum(x.len(), |i| m[i] * (0.5 * alpha * x[i] * x[i] - r[i] * x[i]));
        }
        e
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = plap::grad_j_raw(self.mesh, x, self.a, &self.spec, self.eps);
        if let Some((alpha, r)) = self.quad {
            let m = self.mesh.lumped_mass();
            for i in 0..g.len() {
                g[i] += m[i] * (alpha * x[i] - r[i]);
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Csr {
        let mut h = plap::hess_j_raw(self.mesh, self.pattern, x, self.a, &self.spec, self.eps);
        if let Some((alpha, _)) = self.quad {
            if alpha != 0.0 {
                h.add_diag(self.mesh.lumped_mass(), alpha);
            }
        }
        h
    }
}
