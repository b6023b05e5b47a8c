//! The vector field `Φ_p`, the order inequalities it satisfies, and the
//! discrete functional `J` with its derivatives.

use crate::error::{Error, Result};
use crate::mesh::{field::grad_on, Mesh, ScalarField};
use crate::par;
use crate::sparse::{Csr, Pattern};

pub type Vec2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub theta: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64, theta: f64) -> Result<Self> {
        if !(q > 1.0 && q <= p && p.is_finite()) {
            return Err(Error::invalid(format!("need 1 < q <= p, got p = {p}, q = {q}")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid(format!("theta must be positive, got {theta}")));
        }
        Ok(Exponents { p, q, theta })
    }
}

/// Default gradient regularization for exponent `p`.
pub fn default_mu(p: f64) -> f64 {
    if p >= 2.0 {
        1e-8
    } else {
        1e-6
    }
}

/// `f(s) = C |s|^{θ-1} s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nonlinearity {
    pub theta: f64,
    pub c: f64,
}

impl Nonlinearity {
    pub fn new(theta: f64, c: f64) -> Result<Self> {
        if !(theta > 0.0 && c > 0.0) {
            return Err(Error::invalid(format!("need theta > 0 and C > 0, got {theta}, {c}")));
        }
        Ok(Nonlinearity { theta, c })
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            self.c * s.abs().powf(self.theta - 1.0) * s
        }
    }

    /// `C s (s² + σ²)^{(θ-1)/2}`; equals `eval` at `σ = 0`.
    pub fn eval_smoothed(&self, s: f64, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return self.eval(s);
        }
        self.c * s * (s * s + sigma * sigma).powf(0.5 * (self.theta - 1.0))
    }

    pub fn deriv_smoothed(&self, s: f64, sigma: f64) -> f64 {
        let r2 = s * s + sigma * sigma;
        if r2 == 0.0 {
            return if self.theta > 1.0 { 0.0 } else if self.theta == 1.0 { self.c } else { f64::INFINITY };
        }
        self.c * r2.powf(0.5 * (self.theta - 3.0)) * (self.theta * s * s + sigma * sigma)
    }
}

/// Data of the absorption problem `-ε div Φ_p(∇w, ∇a) + Λ|w|^{θ-1}w = 0`, `w = δ` on the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxiliarySpec {
    pub delta: f64,
    pub lambda: f64,
    pub exponents: Exponents,
    pub sigma: f64,
    pub mu: f64,
}

impl AuxiliarySpec {
    pub fn new(delta: f64, lambda: f64, exponents: Exponents) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0,1), got {delta}")));
        }
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("Lambda must be positive, got {lambda}")));
        }
        Ok(AuxiliarySpec { delta, lambda, exponents, sigma: 1e-6, mu: default_mu(exponents.p) })
    }
}

#[inline]
fn norm2(v: Vec2) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

#[inline]
fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `(|v|² + μ²)^{(p-2)/2} v`, zero at `v = 0`.
#[inline]
pub fn pow_vec(v: Vec2, p: f64, mu: f64) -> Vec2 {
    let n2 = norm2(v);
    if n2 == 0.0 {
        return [0.0, 0.0];
    }
    let c = if p == 2.0 { 1.0 } else { (n2 + mu * mu).powf(0.5 * (p - 2.0)) };
    [c * v[0], c * v[1]]
}

/// Jacobian of `pow_vec` (symmetric, stored as `[a11, a12, a22]`).
#[inline]
pub fn pow_vec_jac(v: Vec2, p: f64, mu: f64) -> [f64; 3] {
    if p == 2.0 {
        return [1.0, 0.0, 1.0];
    }
    let r2 = norm2(v) + mu * mu;
    if r2 == 0.0 {
        let c = if p > 2.0 { 0.0 } else { f64::INFINITY };
        return [c, 0.0, c];
    }
    let c = r2.powf(0.5 * (p - 2.0));
    let d = (p - 2.0) * c / r2;
    [c + d * v[0] * v[0], d * v[0] * v[1], c + d * v[1] * v[1]]
}

/// `Φ_p(η, ξ) = |η-ξ|^{p-2}(η-ξ) + |ξ|^{p-2}ξ`.
pub fn phi_p(eta: Vec2, xi: Vec2, p: f64) -> Vec2 {
    phi_p_regularized(eta, xi, p, 0.0)
}

pub fn phi_p_regularized(eta: Vec2, xi: Vec2, p: f64, mu: f64) -> Vec2 {
    let a = pow_vec(sub(eta, xi), p, mu);
    let b = pow_vec(xi, p, mu);
    [a[0] + b[0], a[1] + b[1]]
}

/// One side-by-side evaluation of an inequality `lhs ≥ rhs` or `lhs ≤ rhs`.
#[derive(Clone, Copy, Debug)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when the nondegeneracy guard fails and the check was skipped.
    pub holds: Option<bool>,
}

#[derive(Clone, Copy, Debug)]
pub struct LemmaReport {
    pub ge: Inequality,
    pub le: Inequality,
    pub sage: Inequality,
    pub sale: Inequality,
    pub pass: bool,
}

pub const LEMMA_SLACK: f64 = 1e-10;

pub fn lemma_constants(p: f64) -> (f64, f64) {
    let a = p - 1.0;
    let b = 2f64.powf(2.0 - p);
    (a.min(b), a.max(b))
}

/// Evaluate the four order inequalities for `Φ_p`.
pub fn check_lemma_order(eta: Vec2, eta_prime: Vec2, xi: Vec2, p: f64) -> LemmaReport {
    check_lemma_order_scaled(eta, eta_prime, xi, p, 1.0)
}

/// As [`check_lemma_order`] with the lower constant multiplied by
/// `lower_factor`; used to confirm the harness can fail.
pub fn check_lemma_order_scaled(eta: Vec2, eta_prime: Vec2, xi: Vec2, p: f64, lower_factor: f64) -> LemmaReport {
    let (cmin, cmax) = lemma_constants(p);
    let cmin = cmin * lower_factor;
    let n = |v: Vec2| norm2(v).sqrt();
    // Slack is relative to the size of the terms entering each side, so
    // rounding in Φ_p itself is not mistaken for a violation.
    let ge_ok = |lhs: f64, rhs: f64, mag: f64| lhs >= rhs - LEMMA_SLACK * rhs.abs().max(mag);
    let le_ok = |lhs: f64, rhs: f64, mag: f64| lhs <= rhs + LEMMA_SLACK * rhs.abs().max(mag);

    let phi = phi_p(eta, xi, p);
    let s1 = n(sub(eta, xi)) + n(xi);
    let mag1 = n(sub(eta, xi)).powf(p - 1.0) + n(xi).powf(p - 1.0);
    let (ge, le) = if s1 > 0.0 {
        let w = s1.powf(p - 2.0);
        let lhs_ge = dot(phi, eta);
        let rhs_ge = cmin * w * norm2(eta);
        let lhs_le = n(phi);
        let rhs_le = cmax * w * n(eta);
        (
            Inequality { lhs: lhs_ge, rhs: rhs_ge, holds: Some(ge_ok(lhs_ge, rhs_ge, mag1 * n(eta))) },
            Inequality { lhs: lhs_le, rhs: rhs_le, holds: Some(le_ok(lhs_le, rhs_le, mag1)) },
        )
    } else {
        let skip = Inequality { lhs: f64::NAN, rhs: f64::NAN, holds: None };
        (skip, skip)
    };

    let s2 = n(sub(eta, xi)) + n(sub(eta_prime, xi));
    let (sage, sale) = if s2 > 0.0 {
        let w = s2.powf(p - 2.0);
        let phi2 = phi_p(eta_prime, xi, p);
        let diff = sub(phi, phi2);
        let de = sub(eta, eta_prime);
        let mag2 = n(sub(eta, xi)).powf(p - 1.0) + n(sub(eta_prime, xi)).powf(p - 1.0);
        let lhs_sa = dot(diff, de);
        let rhs_sa = cmin * w * norm2(de);
        let lhs_sl = n(diff);
        let rhs_sl = cmax * w * n(de);
        (
            Inequality { lhs: lhs_sa, rhs: rhs_sa, holds: Some(ge_ok(lhs_sa, rhs_sa, mag2 * n(de))) },
            Inequality { lhs: lhs_sl, rhs: rhs_sl, holds: Some(le_ok(lhs_sl, rhs_sl, mag2)) },
        )
    } else {
        let skip = Inequality { lhs: f64::NAN, rhs: f64::NAN, holds: None };
        (skip, skip)
    };
    let pass = [ge, le, sage, sale].iter().all(|i| i.holds != Some(false));
    LemmaReport { ge, le, sage, sale, pass }
}

/// `Λ₁ = d^{q-1} C`.
pub fn lambda1_lower_rhs(d: f64, c: f64, q: f64) -> Result<f64> {
    if !(d > 0.0 && c > 0.0 && q > 1.0) {
        return Err(Error::invalid(format!("need d > 0, C > 0, q > 1; got {d}, {c}, {q}")));
    }
    Ok(d.powf(q - 1.0) * c)
}

/// `(√(s²+σ²) - σ)^{1+θ}`, the smoothed `|s|^{1+θ}`.
#[inline]
pub fn absorb(s: f64, theta: f64, sigma: f64) -> f64 {
    let g = if sigma == 0.0 { s.abs() } else { s * s / ((s * s + sigma * sigma).sqrt() + sigma) };
    if g == 0.0 {
        0.0
    } else {
        g.powf(1.0 + theta)
    }
}

#[inline]
pub fn absorb_d1(s: f64, theta: f64, sigma: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let r = (s * s + sigma * sigma).sqrt();
    let g = s * s / (r + sigma);
    (1.0 + theta) * g.powf(theta) * s / r
}

#[inline]
pub fn absorb_d2(s: f64, theta: f64, sigma: f64) -> f64 {
    let r = (s * s + sigma * sigma).sqrt();
    if r == 0.0 {
        return if theta > 1.0 { 0.0 } else if theta == 1.0 { 2.0 } else { f64::INFINITY };
    }
    let g = s * s / (r + sigma);
    let first = if g == 0.0 { 0.0 } else { theta * g.powf(theta - 1.0) * (s / r) * (s / r) };
    let second = if sigma == 0.0 { 0.0 } else { g.powf(theta) * sigma * sigma / (r * r * r) };
    (1.0 + theta) * (first + second)
}

/// `W_μ(g) = ((|g|²+μ²)^{p/2} - μ^p)/p`, whose gradient is `pow_vec(g, p, μ)`.
#[inline]
pub fn dirichlet_density(g: Vec2, p: f64, mu: f64) -> f64 {
    let r2 = norm2(g) + mu * mu;
    (r2.powf(0.5 * p) - mu.powf(p)) / p
}

fn check_pair(w: &ScalarField, a: &ScalarField) -> Result<()> {
    if !w.same_mesh(a) {
        return Err(Error::invalid("fields live on different meshes"));
    }
    Ok(())
}

/// The discrete functional
/// `J(w) = (ε/p)∫|∇w-∇a|^p + ε∫∇_p a·∇w + Λ∫|w|^{1+θ}`
/// with constant gradients per triangle and the edge-midpoint rule for the
/// absorption; `spec.sigma` and `spec.mu` smooth the two non-smooth terms.
pub fn energy_j(w: &ScalarField, a: &ScalarField, spec: &AuxiliarySpec, eps: f64) -> Result<f64> {
    check_pair(w, a)?;
    Ok(energy_j_raw(w.mesh(), w.values(), a.values(), spec, eps))
}

pub(crate) fn energy_j_raw(m: &Mesh, w: &[f64], a: &[f64], spec: &AuxiliarySpec, eps: f64) -> f64 {
    let p = spec.exponents.p;
    let th = spec.exponents.theta;
    par::sum(m.n_triangles(), |t| {
        let gw = grad_on(m, w, t);
        let ga = grad_on(m, a, t);
        let diff = dirichlet_density(sub(gw, ga), p, spec.mu);
        let lin = dot(pow_vec(ga, p, spec.mu), gw);
        if spec.lambda == 0.0 {
            return m.area(t) * eps * (diff + lin);
        }
        let [i, j, k] = m.triangles()[t];
        let abs = absorb(0.5 * (w[i] + w[j]), th, spec.sigma)
            + absorb(0.5 * (w[j] + w[k]), th, spec.sigma)
            + absorb(0.5 * (w[k] + w[i]), th, spec.sigma);
        m.area(t) * (eps * (diff + lin) + spec.lambda * abs / 3.0)
    })
}

/// Exact gradient of [`energy_j`], zeroed on boundary vertices.
pub fn grad_j(w: &ScalarField, a: &ScalarField, spec: &AuxiliarySpec, eps: f64) -> Result<ScalarField> {
    check_pair(w, a)?;
    if spec.sigma == 0.0 && spec.exponents.theta < 1.0 {
        return Err(Error::InvalidConfiguration(
            "absorption smoothing sigma must be positive when theta < 1".into(),
        ));
    }
    let m = w.mesh();
    let mut g = grad_j_raw(m, w.values(), a.values(), spec, eps);
    for (i, gi) in g.iter_mut().enumerate() {
        if m.is_boundary(i) {
            *gi = 0.0;
        }
    }
    ScalarField::new(m.clone(), g)
}

fn local_grad(m: &Mesh, w: &[f64], a: &[f64], spec: &AuxiliarySpec, eps: f64, t: usize) -> [f64; 3] {
    let p = spec.exponents.p;
    let th = spec.exponents.theta;
    let gw = grad_on(m, w, t);
    let ga = grad_on(m, a, t);
    let flux = phi_p_regularized(gw, ga, p, spec.mu);
    let hg = m.hat_gradients(t);
    let tri = m.triangles()[t];
    let area = m.area(t);
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = area * eps * dot(flux, hg[i]);
    }
    for e in 0..3 {
        if spec.lambda == 0.0 {
            break;
        }
        let (i, j) = (e, (e + 1) % 3);
        let d = absorb_d1(0.5 * (w[tri[i]] + w[tri[j]]), th, spec.sigma);
        let c = spec.lambda * area / 3.0 * 0.5 * d;
        out[i] += c;
        out[j] += c;
    }
    out
}

pub(crate) fn grad_j_raw(m: &Mesh, w: &[f64], a: &[f64], spec: &AuxiliarySpec, eps: f64) -> Vec<f64> {
    let locals = par::map_collect(m.n_triangles(), |t| local_grad(m, w, a, spec, eps, t));
    let mut g = vec![0.0; m.n_vertices()];
    for (t, l) in locals.iter().enumerate() {
        let tri = m.triangles()[t];
        for i in 0..3 {
            g[tri[i]] += l[i];
        }
    }
    g
}

/// Hessian of the smoothed discrete `J`.
pub(crate) fn hess_j_raw(m: &Mesh, pat: &Pattern, w: &[f64], a: &[f64], spec: &AuxiliarySpec, eps: f64) -> Csr {
    let p = spec.exponents.p;
    let th = spec.exponents.theta;
    pat.assemble(m.n_triangles(), |t| {
        let gw = grad_on(m, w, t);
        let ga = grad_on(m, a, t);
        let jac = pow_vec_jac(sub(gw, ga), p, spec.mu);
        let hg = m.hat_gradients(t);
        let tri = m.triangles()[t];
        let area = m.area(t);
        let mut b = [0.0; 9];
        for i in 0..3 {
            let ai = [jac[0] * hg[i][0] + jac[1] * hg[i][1], jac[1] * hg[i][0] + jac[2] * hg[i][1]];
            for j in 0..3 {
                b[3 * i + j] = area * eps * dot(ai, hg[j]);
            }
        }
        for e in 0..3 {
            if spec.lambda == 0.0 {
                break;
            }
            let (i, j) = (e, (e + 1) % 3);
            let d2 = absorb_d2(0.5 * (w[tri[i]] + w[tri[j]]), th, spec.sigma);
            let c = spec.lambda * area / 3.0 * 0.25 * d2;
            b[3 * i + i] += c;
            b[3 * j + j] += c;
            b[3 * i + j] += c;
            b[3 * j + i] += c;
        }
        b
    })
}

/// Weak residual of the main problem at every vertex (hat test functions,
/// lumped quadrature for the reaction); boundary entries are zero.
///
/// `R_i = ε Σ_T |T| ∇_p u·∇φ_i - m_i u_i^{q-1} f(a_i - u_i)`.
pub fn residual_main(
    u: &ScalarField,
    a: &ScalarField,
    exponents: &Exponents,
    f: &Nonlinearity,
    eps: f64,
) -> Result<ScalarField> {
    check_pair(u, a)?;
    let m = u.mesh();
    let r = residual_main_raw(m, u.values(), a.values(), exponents, f, eps, 0.0);
    ScalarField::new(m.clone(), r)
}

/// `|u|^{q-2} u`.
#[inline]
pub(crate) fn signed_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(e - 1.0) * u
    }
}

pub(crate) fn residual_main_raw(
    m: &Mesh,
    u: &[f64],
    a: &[f64],
    ex: &Exponents,
    f: &Nonlinearity,
    eps: f64,
    mu: f64,
) -> Vec<f64> {
    let p = ex.p;
    let locals = par::map_collect(m.n_triangles(), |t| {
        let flux = pow_vec(grad_on(m, u, t), p, mu);
        let hg = m.hat_gradients(t);
        let c = m.area(t) * eps;
        [c * dot(flux, hg[0]), c * dot(flux, hg[1]), c * dot(flux, hg[2])]
    });
    let mut r = vec![0.0; m.n_vertices()];
    for (t, l) in locals.iter().enumerate() {
        let tri = m.triangles()[t];
        for i in 0..3 {
            r[tri[i]] += l[i];
        }
    }
    let mass = m.lumped_mass();
    for i in 0..r.len() {
        if m.is_boundary(i) {
            r[i] = 0.0;
        } else {
            r[i] -= mass[i] * signed_pow(u[i], ex.q - 1.0) * f.eval(a[i] - u[i]);
        }
    }
    r
}
