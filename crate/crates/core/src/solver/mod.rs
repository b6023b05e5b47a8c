//! Main problem by monotone iteration from the supersolution `a`, the
//! absorption problem by minimizing `J`, and sub/supersolution certificates.
//!
//! The main solver works in the gap `v = a - u`. Because `a` is affine,
//! `-εΔ_p u = u^{q-1} f(a-u)` becomes
//! `-ε div Φ_p(∇v, ∇a) + (a-v)^{q-1} f(v) = 0` with `v = a` on the boundary,
//! and the coincidence set is where `v` vanishes.

mod aux;
mod certify;
pub(crate) mod minimize;

pub use aux::{solve_auxiliary, solve_auxiliary_on, AuxSolution};
pub use certify::{
    build_eigen_subsolution, check_subsolution, check_supersolution, comparison_check, CertificationReport,
    Comparison,
};

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, ScalarField};
use crate::par;
use crate::plap::{self, AuxiliarySpec, Exponents, Nonlinearity};
use crate::sparse::{pcg, Pattern};
use minimize::{minimize, strong_norm, FieldEnergy, NewtonOptions};

/// Problem data: an affine `a(x) = a0 + b·x` on a mesh, exponents, `f`, `ε`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub mesh: Arc<Mesh>,
    pub a0: f64,
    pub slope: Point,
    pub a: ScalarField,
    pub exponents: Exponents,
    pub f: Nonlinearity,
    pub eps: f64,
    /// Constant-`a` mode, where `∇a = 0` is allowed.
    pub degenerate: bool,
}

impl ProblemSpec {
    pub fn new(
        mesh: Arc<Mesh>,
        a0: f64,
        slope: Point,
        exponents: Exponents,
        f: Nonlinearity,
        eps: f64,
        degenerate: bool,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if f.theta != exponents.theta {
            return Err(Error::invalid("nonlinearity and exponents disagree on theta"));
        }
        let slope_norm = slope[0].hypot(slope[1]);
        if degenerate && slope_norm != 0.0 {
            return Err(Error::invalid("degenerate mode needs a constant coefficient (zero slope)"));
        }
        if !degenerate && slope_norm == 0.0 {
            return Err(Error::invalid("a needs a nonvanishing gradient unless degenerate mode is selected"));
        }
        let a = ScalarField::from_fn(mesh.clone(), |x| a0 + slope[0] * x[0] + slope[1] * x[1])?;
        if !(a.min() > 0.0) {
            return Err(Error::invalid(format!("a must be positive on the closed domain, min a = {}", a.min())));
        }
        Ok(ProblemSpec { mesh, a0, slope, a, exponents, f, eps, degenerate })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.mesh.clone(), self.a0, self.slope, self.exponents, self.f, eps, self.degenerate)
    }

    pub fn a_at(&self, x: Point) -> f64 {
        self.a0 + self.slope[0] * x[0] + self.slope[1] * x[1]
    }

    pub fn a_max(&self) -> f64 {
        self.a.max()
    }

    /// `d = inf a / 2`.
    pub fn d(&self) -> f64 {
        0.5 * self.a.min()
    }

    /// Coincidence tolerance `τ_c = max(1e-6 ‖a‖_∞, 10 · newton_tol)`.
    pub fn tau_c(&self, cfg: &SolveConfig) -> f64 {
        (1e-6 * self.a_max()).max(10.0 * cfg.newton_tol)
    }

    /// The weight `f(a)` of the existence eigenvalue.
    pub fn f_of_a(&self) -> ScalarField {
        let v = self.a.values().iter().map(|&x| self.f.eval(x)).collect();
        ScalarField::new(self.mesh.clone(), v).expect("f(a) is finite")
    }
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    /// Strong-form residual target for the smoothed problem at each stage.
    pub newton_tol: f64,
    /// Acceptance bound on the unsmoothed strong residual `max |R_i| / m_i`.
    pub accept_tol: f64,
    pub max_outer: usize,
    /// Monotone iterations before switching to Newton.
    pub picard_steps: usize,
    /// `λ̂`; chosen from the Lipschitz bound of the smoothed reaction when `None`.
    pub picard_shift: Option<f64>,
    /// Smoothing of `f` used by the monotone phase.
    pub sigma: f64,
    pub mu: Option<f64>,
    /// `(σ, μ)` stages of the Newton phase; derived from `accept_tol` when empty.
    pub schedule: Vec<(f64, f64)>,
    /// Precomputed `λ_{f(a)}` for the `p = q` threshold check.
    pub lambda_fa: Option<f64>,
    pub cg_rtol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            newton_tol: 1e-8,
            accept_tol: 1e-6,
            max_outer: 600,
            picard_steps: 20,
            picard_shift: None,
            sigma: 1.0,
            mu: None,
            schedule: Vec::new(),
            lambda_fa: None,
            cg_rtol: 1e-10,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.accept_tol > 0.0 && self.cg_rtol > 0.0) {
            return Err(Error::InvalidConfiguration("tolerances must be positive".into()));
        }
        if !(self.sigma >= 0.0) || self.mu.is_some_and(|m| !(m >= 0.0)) {
            return Err(Error::InvalidConfiguration("sigma and mu must be nonnegative".into()));
        }
        if self.schedule.windows(2).any(|w| w[1].0 > w[0].0 || w[1].1 > w[0].1) {
            return Err(Error::InvalidConfiguration("continuation schedule must be decreasing".into()));
        }
        Ok(())
    }

    pub(crate) fn stages(&self, theta: f64, p: f64, mu: f64) -> Vec<(f64, f64)> {
        if !self.schedule.is_empty() {
            return self.schedule.clone();
        }
        // σ_k = 10^{-2k} until the smoothing error C σ^θ is well below the
        // acceptance tolerance.
        let target = 0.01 * self.accept_tol;
        let mut out = Vec::new();
        let mut s = self.sigma.max(1e-300);
        loop {
            out.push((s, mu));
            if s.powf(theta) <= target || s < 1e-40 {
                break;
            }
            s *= 1e-2;
        }
        // For p < 2 the flux error of μ is O(μ^{p-1}) where ∇u is small,
        // which the unsmoothed acceptance residual sees.
        if p < 2.0 {
            let mut m = mu;
            while m > 1e-12 {
                m *= 1e-2;
                out.push((s, m));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub picard_iterations: usize,
    pub newton_iterations: usize,
    /// Unsmoothed strong residual of the returned field.
    pub final_residual: f64,
    /// Energy of each accepted minimization step (nonincreasing).
    pub energy_history: Vec<f64>,
    /// Newton-phase merit `Σ F_i² / m_i` after each accepted step.
    pub merit_history: Vec<f64>,
    /// Monotone phase: the number of steps whose `u` increased somewhere by
    /// more than 1e-10, and the largest increase seen.
    pub monotonicity_violations: usize,
    pub max_monotonicity_violation: f64,
    pub picard_shift: f64,
    pub final_sigma: f64,
    pub wall_time_s: f64,
}

impl SolveReport {
    /// One `key value` pair per line.
    pub fn to_log(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push(' ');
            s.push_str(&v);
            s.push('\n');
        };
        kv("iterations", self.iterations.to_string());
        kv("picard_iterations", self.picard_iterations.to_string());
        kv("newton_iterations", self.newton_iterations.to_string());
        kv("final_residual", format!("{:.6e}", self.final_residual));
        kv("monotonicity_violations", self.monotonicity_violations.to_string());
        kv("max_monotonicity_violation", format!("{:.6e}", self.max_monotonicity_violation));
        kv("picard_shift", format!("{:.6e}", self.picard_shift));
        kv("final_sigma", format!("{:.6e}", self.final_sigma));
        kv("wall_time_s", format!("{:.3}", self.wall_time_s));
        let hist = |h: &[f64]| h.iter().map(|e| format!("{e:.12e}")).collect::<Vec<_>>().join(" ");
        kv("energy_history", hist(&self.energy_history));
        kv("merit_history", hist(&self.merit_history));
        s
    }
}

#[derive(Clone, Debug)]
pub struct MainSolution {
    pub u: ScalarField,
    /// `v = a - u`, computed directly (not by cancellation).
    pub gap: ScalarField,
    pub report: SolveReport,
}

/// Gap-form reaction `h(x, v) = P(a - v) f_σ(v)` with `P(s) = s^{q-1}`
/// (smoothed the same way as `f` when `q < 2`).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Reaction {
    pub(crate) q: f64,
    pub(crate) f: Nonlinearity,
    pub(crate) sigma: f64,
}

impl Reaction {
    fn p_fn(&self) -> Nonlinearity {
        Nonlinearity { theta: self.q - 1.0, c: 1.0 }
    }

    fn p_sigma(&self) -> f64 {
        if self.q < 2.0 {
            self.sigma
        } else {
            0.0
        }
    }

    pub(crate) fn h(&self, a: f64, v: f64) -> f64 {
        self.p_fn().eval_smoothed(a - v, self.p_sigma()) * self.f.eval_smoothed(v, self.sigma)
    }

    pub(crate) fn dh(&self, a: f64, v: f64) -> f64 {
        let pf = self.p_fn();
        let s = a - v;
        let ps = self.p_sigma();
        let dp = if self.q == 2.0 { 1.0 } else { pf.deriv_smoothed(s, ps) };
        -dp * self.f.eval_smoothed(v, self.sigma) + pf.eval_smoothed(s, ps) * self.f.deriv_smoothed(v, self.sigma)
    }

    /// Sampled `sup h'` over `v ∈ [0, a]` for the extreme values of `a`.
    pub(crate) fn lipschitz(&self, a_min: f64, a_max: f64) -> f64 {
        let mut best = 0.0f64;
        for &a in &[a_min, a_max] {
            best = best.max(self.dh(a, 0.0));
            for k in 0..=400 {
                let geo = a * 10f64.powf(-16.0 * k as f64 / 400.0);
                let lin = a * k as f64 / 400.0;
                for v in [geo, lin] {
                    let d = self.dh(a, v);
                    if d.is_finite() {
                        best = best.max(d);
                    }
                }
            }
        }
        best
    }
}

/// Strong residual `max |F_i| / m_i` of the unsmoothed gap equation.
pub fn gap_residual(spec: &ProblemSpec, v: &[f64]) -> f64 {
    let m = &*spec.mesh;
    let free: Vec<bool> = (0..m.n_vertices()).map(|i| !m.is_boundary(i)).collect();
    let f = gap_equation(spec, v, Reaction { q: spec.exponents.q, f: spec.f, sigma: 0.0 }, 0.0);
    strong_norm(&f, m.lumped_mass(), &free)
}

fn flux_spec(spec: &ProblemSpec, mu: f64) -> AuxiliarySpec {
    AuxiliarySpec { delta: 0.5, lambda: 0.0, exponents: spec.exponents, sigma: 0.0, mu }
}

/// `F_i = ε Σ_T |T| Φ_μ(∇v, ∇a)·∇φ_i + m_i h(a_i, v_i)`.
fn gap_equation(spec: &ProblemSpec, v: &[f64], r: Reaction, mu: f64) -> Vec<f64> {
    let m = &*spec.mesh;
    let a = spec.a.values();
    let mut f = plap::grad_j_raw(m, v, a, &flux_spec(spec, mu), spec.eps);
    let mass = m.lumped_mass();
    par::for_each_mut(&mut f, |i, fi| *fi += mass[i] * r.h(a[i], v[i]));
    f
}

fn threshold_check(spec: &ProblemSpec, cfg: &SolveConfig) -> Result<()> {
    if spec.exponents.p != spec.exponents.q {
        return Ok(());
    }
    let lambda = match cfg.lambda_fa {
        Some(l) => l,
        None => crate::spectral::weighted_first_eigenvalue(&spec.mesh, spec.exponents.p, &spec.f_of_a())?,
    };
    let eps_a = crate::spectral::eps_threshold(spec.exponents.p, spec.exponents.q, lambda)?;
    let guarded = 0.95 * eps_a;
    if spec.eps >= guarded {
        return Err(Error::NoSolutionRegime { eps: spec.eps, threshold: guarded });
    }
    Ok(())
}

/// Solve the main problem for its maximal solution `0 ≤ u ≤ a`.
pub fn solve_main(spec: &ProblemSpec, cfg: &SolveConfig) -> Result<MainSolution> {
    cfg.validate()?;
    threshold_check(spec, cfg)?;
    let start = Instant::now();
    let m = &*spec.mesh;
    let n = m.n_vertices();
    let a = spec.a.values();
    let mass = m.lumped_mass();
    let free: Vec<bool> = (0..n).map(|i| !m.is_boundary(i)).collect();
    let pattern = Pattern::new(m);
    let mu = cfg.mu.unwrap_or_else(|| plap::default_mu(spec.exponents.p));
    let q = spec.exponents.q;
    let mut report = SolveReport::default();

    // v = 0 in the interior (u = a), v = a on the boundary (u = 0).
    let mut v: Vec<f64> = (0..n).map(|i| if free[i] { 0.0 } else { a[i] }).collect();

    // Monotone phase.
    let r0 = Reaction { q, f: spec.f, sigma: cfg.sigma };
    let lam = cfg.picard_shift.unwrap_or_else(|| 1.05 * r0.lipschitz(spec.a.min(), spec.a_max())).max(1e-12);
    report.picard_shift = lam;
    let fspec = flux_spec(spec, mu);
    for _ in 0..cfg.picard_steps {
        let rhs: Vec<f64> = (0..n).map(|i| lam * v[i] - r0.h(a[i], v[i])).collect();
        let energy = FieldEnergy { mesh: m, pattern: &pattern, a, spec: fspec, eps: spec.eps, quad: Some((lam, &rhs)) };
        let scale = rhs.iter().map(|x| x.abs()).fold(lam * 1e-3, f64::max);
        let opts = NewtonOptions { tol: 1e-3 * cfg.newton_tol.max(1e-12) * scale.max(1.0), cg_rtol: cfg.cg_rtol, ..Default::default() };
        let out = minimize(&energy, v.clone(), &free, mass, &opts);
        report.energy_history.extend(out.energy.last());
        let mut incr = 0.0f64;
        let mut violation = 0.0f64;
        for i in 0..n {
            let d = out.x[i] - v[i];
            incr = incr.max(d.abs());
            // u decreases iff v increases.
            violation = violation.max(-d);
        }
        if violation > 1e-10 {
            report.monotonicity_violations += 1;
        }
        report.max_monotonicity_violation = report.max_monotonicity_violation.max(violation);
        v = out.x;
        report.picard_iterations += 1;
        if incr < 1e-3 * spec.a_max() {
            break;
        }
    }

    // Newton phase with σ continuation: (J + sM) d = -F, accepted when the
    // merit Σ F_i²/m_i drops. For p ≠ 2 the P1 stiffness of the anisotropic
    // tangent is not an M-matrix, so the discrete solution may undershoot
    // v = 0 by a rounding-sized amount near the free boundary; `f` and `P`
    // are extended oddly and only a safety box is imposed.
    let merit = |f: &[f64]| par::sum(n, |i| if free[i] { f[i] * f[i] / mass[i] } else { 0.0 });
    let stages = cfg.stages(spec.exponents.theta, spec.exponents.p, mu);
    let mut budget = cfg.max_outer;
    for &(sigma, mu_s) in &stages {
        report.final_sigma = sigma;
        let r = Reaction { q, f: spec.f, sigma };
        let fs = flux_spec(spec, mu_s);
        let lam_s = 1.05 * r.lipschitz(spec.a.min(), spec.a_max());
        let mut shift = 0.0f64;
        let mut f = gap_equation(spec, &v, r, mu_s);
        let mut phi = merit(&f);
        loop {
            if strong_norm(&f, mass, &free) <= cfg.newton_tol {
                break;
            }
            if budget == 0 {
                break;
            }
            budget -= 1;
            report.newton_iterations += 1;
            let mut jac = plap::hess_j_raw(m, &pattern, &v, a, &fs, spec.eps);
            let dh: Vec<f64> = (0..n).map(|i| mass[i] * r.dh(a[i], v[i])).collect();
            jac.add_diag(&dh, 1.0);
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let mut accepted = false;
            for _ in 0..40 {
                let mut js = jac.clone();
                if shift > 0.0 {
                    js.add_diag(mass, shift);
                }
                let cg = pcg(&js, &rhs, &free, cfg.cg_rtol, 20_000);
                if cg.negative_curvature || !cg.x.iter().all(|x| x.is_finite()) {
                    shift = if shift == 0.0 { 1e-6 * lam_s } else { shift * 10.0 };
                    continue;
                }
                let vt: Vec<f64> = (0..n).map(|i| (v[i] + cg.x[i]).clamp(-a[i], 2.0 * a[i])).collect();
                let ft = gap_equation(spec, &vt, r, mu_s);
                let pt = merit(&ft);
                if pt < phi {
                    v = vt;
                    f = ft;
                    phi = pt;
                    report.merit_history.push(phi);
                    shift *= 0.1;
                    if shift < 1e-12 * lam_s {
                        shift = 0.0;
                    }
                    accepted = true;
                    break;
                }
                shift = if shift == 0.0 { 1e-6 * lam_s } else { shift * 10.0 };
            }
            if !accepted {
                // Fall back to one monotone step at this smoothing level.
                let rhs: Vec<f64> = (0..n).map(|i| lam_s * v[i] - r.h(a[i], v[i])).collect();
                let energy = FieldEnergy { mesh: m, pattern: &pattern, a, spec: fs, eps: spec.eps, quad: Some((lam_s, &rhs)) };
                let opts = NewtonOptions { tol: 1e-3 * cfg.newton_tol, cg_rtol: cfg.cg_rtol, ..Default::default() };
                let out = minimize(&energy, v.clone(), &free, mass, &opts);
                v = out.x.iter().zip(a).map(|(x, &ai)| x.clamp(-ai, 2.0 * ai)).collect();
                f = gap_equation(spec, &v, r, mu_s);
                phi = merit(&f);
                report.merit_history.push(phi);
                report.picard_iterations += 1;
                shift = lam_s;
            }
        }
    }
    report.iterations = report.picard_iterations + report.newton_iterations;
    report.final_residual = gap_residual(spec, &v);
    report.wall_time_s = start.elapsed().as_secs_f64();
    if !(report.final_residual <= cfg.accept_tol) {
        return Err(Error::no_convergence(
            format!(
                "residual {:.3e} above {:.1e} after {} iterations",
                report.final_residual, cfg.accept_tol, report.iterations
            ),
            Some((0..n).map(|i| a[i] - v[i]).collect()),
        ));
    }
    let u: Vec<f64> = (0..n).map(|i| if free[i] { a[i] - v[i] } else { 0.0 }).collect();
    Ok(MainSolution {
        u: ScalarField::new(spec.mesh.clone(), u)?,
        gap: ScalarField::new(spec.mesh.clone(), v)?,
        report,
    })
}
