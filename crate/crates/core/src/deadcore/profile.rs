use crate::error::{Error, Result};
use crate::mesh::{field::grad_on, ScalarField};
use crate::plap::{self, AuxiliarySpec};

/// Energies of the absorption solution over the balls `B_ρ`.
#[derive(Clone, Debug)]
pub struct EnergyProfile {
    pub rho: Vec<f64>,
    /// `∫_{B_ρ} Φ_p(∇w, ∇ã)·∇w`.
    pub e_d: Vec<f64>,
    /// `∫_{B_ρ} |w|^{1+θ}`.
    pub e_a: Vec<f64>,
    /// `E_D + Λ E_A`.
    pub e_t: Vec<f64>,
    /// Area of the triangles counted in each ball.
    pub area: Vec<f64>,
    pub lambda: f64,
}

/// Radial energy profile on `ρ_k = k / n_rho`, `k = 1..=n_rho`.
///
/// A triangle belongs to `B_ρ` when its barycenter does. The integrands are
/// evaluated without smoothing: the diffusion density is constant per
/// triangle and the absorption uses the edge-midpoint rule.
pub fn energy_profile(w: &ScalarField, a_tilde: &ScalarField, spec: &AuxiliarySpec, n_rho: usize) -> Result<EnergyProfile> {
    if !w.same_mesh(a_tilde) {
        return Err(Error::invalid("fields live on different meshes"));
    }
    if n_rho == 0 {
        return Err(Error::invalid("need at least one radius"));
    }
    let m = w.mesh();
    let p = spec.exponents.p;
    let th = spec.exponents.theta;
    let wv = w.values();
    let mut tris: Vec<(f64, f64, f64, f64)> = (0..m.n_triangles())
        .map(|t| {
            let b = m.barycenter(t);
            let gw = grad_on(m, wv, t);
            let ga = grad_on(m, a_tilde.values(), t);
            let phi = plap::phi_p(gw, ga, p);
            let d = m.area(t) * (phi[0] * gw[0] + phi[1] * gw[1]).max(0.0);
            let [i, j, k] = m.triangles()[t];
            let mid = |x: f64, y: f64| (0.5 * (x + y)).abs().powf(1.0 + th);
            let a = m.area(t) / 3.0 * (mid(wv[i], wv[j]) + mid(wv[j], wv[k]) + mid(wv[k], wv[i]));
            (b[0].hypot(b[1]), d, a, m.area(t))
        })
        .collect();
    tris.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let radius = match m.domain() {
        crate::mesh::DomainKind::Disk { radius } => radius,
        crate::mesh::DomainKind::Rectangle { .. } => m.vertices().iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max),
    };
    let mut out = EnergyProfile {
        rho: Vec::with_capacity(n_rho),
        e_d: Vec::with_capacity(n_rho),
        e_a: Vec::with_capacity(n_rho),
        e_t: Vec::with_capacity(n_rho),
        area: Vec::with_capacity(n_rho),
        lambda: spec.lambda,
    };
    let (mut cd, mut ca, mut car) = (0.0, 0.0, 0.0);
    let mut idx = 0;
    for k in 1..=n_rho {
        let rho = radius * k as f64 / n_rho as f64;
        let last = k == n_rho;
        while idx < tris.len() && (tris[idx].0 < rho || last) {
            cd += tris[idx].1;
            ca += tris[idx].2;
            car += tris[idx].3;
            idx += 1;
        }
        out.rho.push(rho / radius);
        out.e_d.push(cd);
        out.e_a.push(ca);
        out.e_t.push(cd + spec.lambda * ca);
        out.area.push(car);
    }
    Ok(out)
}

/// Empirical dead-core radius `sup{ρ_k : E_T(ρ_k) ≤ tol · |B_{ρ_k}|}`.
///
/// `tol` is an energy density; the default used by the experiments is
/// `Λ τ_c^{1+θ}`, the absorption density of a field sitting at the
/// coincidence tolerance. Returns 0 when no ball qualifies.
pub fn deadcore_radius(profile: &EnergyProfile, tol: f64) -> f64 {
    let mut r = 0.0;
    for k in 0..profile.rho.len() {
        if profile.area[k] == 0.0 {
            continue;
        }
        if profile.e_t[k] <= tol * profile.area[k] {
            r = profile.rho[k];
        } else {
            break;
        }
    }
    r
}

/// Radius of the largest centred ball whose vertices all satisfy `w ≤ tau`,
/// relative to the domain radius.
pub fn pointwise_core_radius(w: &ScalarField, tau: f64) -> f64 {
    let m = w.mesh();
    let radius = match m.domain() {
        crate::mesh::DomainKind::Disk { radius } => radius,
        crate::mesh::DomainKind::Rectangle { .. } => m.vertices().iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max),
    };
    let r = (0..m.n_vertices())
        .filter(|&i| w.values()[i] > tau)
        .map(|i| {
            let v = m.vertex(i);
            v[0].hypot(v[1])
        })
        .fold(radius, f64::min);
    r / radius
}
