use std::time::Instant;

use super::minimize::{minimize, FieldEnergy, NewtonOptions};
use super::{SolveConfig, SolveReport};
use crate::error::{Error, Result};
use crate::mesh::ScalarField;
use crate::plap::AuxiliarySpec;
use crate::sparse::Pattern;

#[derive(Clone, Debug)]
pub struct AuxSolution {
    pub w: ScalarField,
    pub report: SolveReport,
    /// Strong first-order residual `max |∇J_i| / m_i` at the final smoothing.
    pub grad_norm: f64,
    pub min_w: f64,
    pub max_w: f64,
}

impl AuxSolution {
    /// `0 ≤ w ≤ δ` up to `slack`.
    pub fn within_bounds(&self, delta: f64, slack: f64) -> bool {
        self.min_w >= -slack && self.max_w <= delta + slack
    }
}

/// Minimize the scaled `J` (`ε = 1`) on a disk mesh with `w = δ` on the boundary.
pub fn solve_auxiliary(spec: &AuxiliarySpec, a_tilde: &ScalarField, cfg: &SolveConfig) -> Result<AuxSolution> {
    solve_auxiliary_on(spec, a_tilde, 1.0, cfg)
}

/// As [`solve_auxiliary`] with an explicit `ε` and any mesh.
///
/// The smoothing runs through `σ = δ, δ/100, …` down to `spec.sigma`, each
/// stage warm-started from the previous one.
pub fn solve_auxiliary_on(spec: &AuxiliarySpec, a_tilde: &ScalarField, eps: f64, cfg: &SolveConfig) -> Result<AuxSolution> {
    cfg.validate()?;
    if spec.sigma == 0.0 && spec.exponents.theta < 1.0 {
        return Err(Error::InvalidConfiguration("smoothing sigma must be positive when theta < 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let start = Instant::now();
    let m = &**a_tilde.mesh();
    let n = m.n_vertices();
    let free: Vec<bool> = (0..n).map(|i| !m.is_boundary(i)).collect();
    let pattern = Pattern::new(m);
    let mass = m.lumped_mass();

    let mut stages = Vec::new();
    let mut s = spec.delta;
    while s > spec.sigma {
        stages.push(s);
        s *= 1e-2;
    }
    stages.push(spec.sigma);

    let mut w = vec![spec.delta; n];
    let mut report = SolveReport::default();
    let mut grad_norm = f64::INFINITY;
    for (k, &sigma) in stages.iter().enumerate() {
        let stage_spec = AuxiliarySpec { sigma, ..*spec };
        let energy = FieldEnergy { mesh: m, pattern: &pattern, a: a_tilde.values(), spec: stage_spec, eps, quad: None };
        let opts = NewtonOptions { tol: cfg.newton_tol, max_iter: cfg.max_outer, cg_rtol: cfg.cg_rtol, ..Default::default() };
        let out = minimize(&energy, w, &free, mass, &opts);
        report.newton_iterations += out.iterations;
        w = out.x;
        grad_norm = out.grad_norm;
        report.final_sigma = sigma;
        if k + 1 == stages.len() {
            report.energy_history = out.energy;
            if !out.converged {
                return Err(Error::no_convergence(
                    format!("first-order residual {:.3e} above {:.1e} at sigma {:.1e}", out.grad_norm, cfg.newton_tol, sigma),
                    Some(w),
                ));
            }
        }
    }
    report.iterations = report.newton_iterations;
    report.final_residual = grad_norm;
    report.wall_time_s = start.elapsed().as_secs_f64();
    let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
    let max_w = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AuxSolution { w: ScalarField::new(a_tilde.mesh().clone(), w)?, report, grad_norm, min_w, max_w })
}
