use super::ProblemSpec;
use crate::error::{Error, Result};
use crate::mesh::{field::grad_on, DomainKind, Mesh, Point, ScalarField};
use crate::plap;
use crate::spectral::EigenResult;

#[derive(Clone, Debug)]
pub struct CertificationReport {
    /// Extremes of the strong residual `R_i / m_i` over interior vertices.
    pub min_residual: f64,
    pub max_residual: f64,
    pub worst_vertex: Option<usize>,
    pub boundary_ok: bool,
    pub tol: f64,
    pub pass: bool,
}

fn strong_residual(u: &ScalarField, spec: &ProblemSpec) -> Result<Vec<f64>> {
    if !u.same_mesh(&spec.a) {
        return Err(Error::invalid("field and problem live on different meshes"));
    }
    let m = &*spec.mesh;
    let r = plap::residual_main_raw(m, u.values(), spec.a.values(), &spec.exponents, &spec.f, spec.eps, 0.0);
    Ok(r.iter().zip(m.lumped_mass()).map(|(r, m)| r / m).collect())
}

fn certify(u: &ScalarField, spec: &ProblemSpec, tol: f64, upper: bool) -> Result<CertificationReport> {
    let r = strong_residual(u, spec)?;
    let m = &*spec.mesh;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut worst = None;
    let mut worst_val = f64::NEG_INFINITY;
    let mut boundary_ok = true;
    for i in 0..m.n_vertices() {
        let ui = u.values()[i];
        if m.is_boundary(i) {
            boundary_ok &= if upper { ui <= 0.0 } else { ui >= 0.0 };
            continue;
        }
        lo = lo.min(r[i]);
        hi = hi.max(r[i]);
        let bad = if upper { r[i] } else { -r[i] };
        if bad > worst_val {
            worst_val = bad;
            worst = Some(i);
        }
    }
    let pass = boundary_ok && worst_val <= tol;
    Ok(CertificationReport { min_residual: lo, max_residual: hi, worst_vertex: worst, boundary_ok, tol, pass })
}

/// `ε⟨∇_p u, ∇φ_i⟩ ≥ ⟨u^{q-1} f(a-u), φ_i⟩ - tol·m_i` for every interior hat, and `u ≥ 0` on the boundary.
pub fn check_supersolution(u: &ScalarField, spec: &ProblemSpec, tol: f64) -> Result<CertificationReport> {
    certify(u, spec, tol, false)
}

/// `ε⟨∇_p u, ∇φ_i⟩ ≤ ⟨u^{q-1} f(a-u), φ_i⟩ + tol·m_i` for every interior hat, and `u ≤ 0` on the boundary.
pub fn check_subsolution(u: &ScalarField, spec: &ProblemSpec, tol: f64) -> Result<CertificationReport> {
    certify(u, spec, tol, true)
}

fn distance_to_domain_boundary(mesh: &Mesh, x: Point) -> f64 {
    match mesh.domain() {
        DomainKind::Rectangle { lx, ly } => x[0].min(lx - x[0]).min(x[1]).min(ly - x[1]),
        DomainKind::Disk { radius } => radius - x[0].hypot(x[1]),
    }
}

/// `(a(x₀) - δ) z((x - x₀)/(K ε^{1/p}))` inside the ball, zero outside, with
/// `z` the normalized first eigenfunction on the unit disk.
pub fn build_eigen_subsolution(
    spec: &ProblemSpec,
    x0: Point,
    k: f64,
    delta: f64,
    eig: &EigenResult,
) -> Result<ScalarField> {
    let p = spec.exponents.p;
    let q = spec.exponents.q;
    let radius = k * spec.eps.powf(1.0 / p);
    let ax0 = spec.a_at(x0);
    if !(delta > 0.0 && delta < ax0) {
        return Err(Error::invalid(format!("need 0 < delta < a(x0) = {ax0}, got {delta}")));
    }
    let sigma_f = spec.f.eval(0.5 * delta);
    let bound = eig.lambda1 * spec.a_max().powf(p - q) / sigma_f;
    if !(k.powf(p) > bound) {
        return Err(Error::invalid(format!("K^p = {:.4e} must exceed lambda1 |a|^(p-q) / f(delta/2) = {bound:.4e}", k.powf(p))));
    }
    if distance_to_domain_boundary(&spec.mesh, x0) < radius {
        return Err(Error::invalid(format!("ball of radius {radius:.4e} around {x0:?} leaves the domain")));
    }
    // a > a(x0) - δ/2 on the ball keeps f(a - u) ≥ f(δ/2) there.
    let slope = spec.slope[0].hypot(spec.slope[1]);
    if slope * radius >= 0.5 * delta {
        return Err(Error::invalid(format!("ball of radius {radius:.4e} is too wide for delta = {delta} at slope {slope}")));
    }
    ScalarField::from_fn(spec.mesh.clone(), |x| {
        let y = [(x[0] - x0[0]) / radius, (x[1] - x0[1]) / radius];
        if y[0].hypot(y[1]) >= 1.0 {
            return 0.0;
        }
        (ax0 - delta) * eig.z.eval(y).unwrap_or(0.0).max(0.0)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Comparison {
    /// Hypotheses certified; `true` iff `u ≤ v + 1e-8` on the region.
    Ordered(bool),
    /// A discrete hypothesis failed; the reason names it.
    Inconclusive(String),
}

/// Discrete comparison principle for `-ε div Φ_p(∇·, ∇a) + g(·)`.
///
/// On `region` (all vertices when `None`), vertices whose hat support lies in
/// the region are interior; the rest are its boundary. The hypotheses are:
/// `g` nondecreasing on the sampled range, `u ≤ v` on the region boundary,
/// and `R_u ≤ R_v + tol·m_i` at interior vertices.
pub fn comparison_check(
    u: &ScalarField,
    v: &ScalarField,
    g: &dyn Fn(f64) -> f64,
    a: &ScalarField,
    eps: f64,
    p: f64,
    region: Option<&[bool]>,
    tol: f64,
) -> Result<Comparison> {
    if !u.same_mesh(v) || !u.same_mesh(a) {
        return Err(Error::invalid("fields live on different meshes"));
    }
    let m = &**u.mesh();
    let n = m.n_vertices();
    let all = vec![true; n];
    let region = region.unwrap_or(&all);
    if region.len() != n {
        return Err(Error::invalid("region mask has the wrong length"));
    }
    let mut inner = vec![true; n];
    for (i, inn) in inner.iter_mut().enumerate() {
        *inn = region[i] && !m.is_boundary(i);
    }
    for t in m.triangles() {
        if t.iter().any(|&i| !region[i]) {
            for &i in t {
                inner[i] = false;
            }
        }
    }

    let mut samples: Vec<f64> = (0..n).filter(|&i| region[i]).flat_map(|i| [u.values()[i], v.values()[i]]).collect();
    samples.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let gs: Vec<f64> = samples.iter().map(|&s| g(s)).collect();
    if gs.windows(2).any(|w| w[1] < w[0]) {
        return Ok(Comparison::Inconclusive("g is not nondecreasing on the sampled range".into()));
    }

    for i in 0..n {
        if region[i] && !inner[i] && u.values()[i] > v.values()[i] {
            return Ok(Comparison::Inconclusive(format!("boundary ordering fails at vertex {i}")));
        }
    }
    let ru = operator_residual(m, u.values(), a.values(), g, eps, p);
    let rv = operator_residual(m, v.values(), a.values(), g, eps, p);
    let mass = m.lumped_mass();
    for i in 0..n {
        if inner[i] && ru[i] > rv[i] + tol * mass[i] {
            return Ok(Comparison::Inconclusive(format!(
                "residual ordering fails at vertex {i} by {:.3e}",
                (ru[i] - rv[i]) / mass[i]
            )));
        }
    }
    let ordered = (0..n).filter(|&i| region[i]).all(|i| u.values()[i] <= v.values()[i] + 1e-8);
    Ok(Comparison::Ordered(ordered))
}

/// `ε Σ_T |T| Φ_p(∇w, ∇a)·∇φ_i + m_i g(w_i)`.
pub(crate) fn operator_residual(m: &Mesh, w: &[f64], a: &[f64], g: &dyn Fn(f64) -> f64, eps: f64, p: f64) -> Vec<f64> {
    let mut r = vec![0.0; w.len()];
    for t in 0..m.n_triangles() {
        let flux = plap::phi_p(grad_on(m, w, t), grad_on(m, a, t), p);
        let hg = m.hat_gradients(t);
        let tri = m.triangles()[t];
        for i in 0..3 {
            r[tri[i]] += eps * m.area(t) * (flux[0] * hg[i][0] + flux[1] * hg[i][1]);
        }
    }
    let mass = m.lumped_mass();
    for i in 0..w.len() {
        r[i] += mass[i] * g(w[i]);
    }
    r
}
