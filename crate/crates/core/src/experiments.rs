//! Sweeps over `(θ, ε)`, the dichotomy table, the sandwich test with a
//! fitted `K`, and absorption-problem runs on the unit disk.

use std::fmt;
use std::sync::Arc;

use crate::deadcore::{
    deadcore_radius, detect_coincidence_gap, energy_profile, fit_m, fit_scaling_resolved, pointwise_core_radius,
    predicted_radius, EnergyProfile, ExponentPack, ScalingFit,
};
use crate::error::{Error, Result};
use crate::mesh::{build_disk_mesh, build_rect_mesh, Mesh, Point, ScalarField};
use crate::par;
use crate::plap::{AuxiliarySpec, Exponents, Nonlinearity};
use crate::solver::{solve_auxiliary, solve_main, MainSolution, ProblemSpec, SolveConfig};
use crate::spectral::weighted_first_eigenvalue;

/// A rectangle mesh, an affine `a`, the exponents `p, q`, the constant of `f`
/// and the `(θ, ε)` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub a0: f64,
    pub slope: Point,
    pub p: f64,
    pub q: f64,
    pub c: f64,
    pub degenerate: bool,
    pub thetas: Vec<f64>,
    pub eps: Vec<f64>,
}

/// `ε ∈ {10⁻², 3·10⁻³, 10⁻³, 3·10⁻⁴, 10⁻⁴}`.
pub const SCALING_EPS: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

impl SweepSpec {
    /// Unit square at 128×128, `a = 1 + 0.1x`, `θ = 0.5`, `q = min(p, 2)`.
    pub fn scaling(p: f64) -> Self {
        SweepSpec {
            lx: 1.0,
            ly: 1.0,
            nx: 128,
            ny: 128,
            a0: 1.0,
            slope: [0.1, 0.0],
            p,
            q: p.min(2.0),
            c: 1.0,
            degenerate: false,
            thetas: vec![0.5],
            eps: SCALING_EPS.to_vec(),
        }
    }

    /// As [`SweepSpec::scaling`] with `a ≡ 1`.
    pub fn constant_coefficient(p: f64) -> Self {
        SweepSpec { slope: [0.0, 0.0], degenerate: true, ..Self::scaling(p) }
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        Ok(Arc::new(build_rect_mesh(self.lx, self.ly, self.nx, self.ny)?))
    }

    pub fn h(&self) -> f64 {
        (self.lx / self.nx as f64).max(self.ly / self.ny as f64)
    }

    pub fn problem(&self, mesh: &Arc<Mesh>, theta: f64, eps: f64) -> Result<ProblemSpec> {
        let ex = Exponents::new(self.p, self.q, theta)?;
        let f = Nonlinearity::new(theta, self.c)?;
        ProblemSpec::new(mesh.clone(), self.a0, self.slope, ex, f, eps, self.degenerate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Nonempty,
    Empty,
    Failed,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Nonempty => "nonempty",
            Classification::Empty => "empty",
            Classification::Failed => "failed",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub measure: f64,
    pub width: f64,
    pub min_interior_gap: f64,
    pub tau_c: f64,
    pub classification: Classification,
    pub residual: f64,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub row: SweepRow,
    pub problem: ProblemSpec,
    pub solution: Option<MainSolution>,
}

fn solve_cell(spec: &ProblemSpec, cfg: &SolveConfig) -> SweepCell {
    let ex = spec.exponents;
    let tau = spec.tau_c(cfg);
    let mut row = SweepRow {
        theta: ex.theta,
        p: ex.p,
        q: ex.q,
        eps: spec.eps,
        measure: f64::NAN,
        width: f64::NAN,
        min_interior_gap: f64::NAN,
        tau_c: tau,
        classification: Classification::Failed,
        residual: f64::NAN,
        iterations: 0,
        error: None,
    };
    let sol = solve_main(spec, cfg).and_then(|sol| {
        let rep = detect_coincidence_gap(&sol.gap, tau)?;
        row.measure = rep.measure;
        row.width = rep.width;
        row.min_interior_gap = rep.min_interior_gap;
        row.classification = if rep.is_empty() { Classification::Empty } else { Classification::Nonempty };
        row.residual = sol.report.final_residual;
        row.iterations = sol.report.iterations;
        Ok(sol)
    });
    match sol {
        Ok(sol) => SweepCell { row, problem: spec.clone(), solution: Some(sol) },
        Err(e) => {
            row.error = Some(e.to_string());
            SweepCell { row, problem: spec.clone(), solution: None }
        }
    }
}

/// Solve every `(θ, ε)` cell, θ-major in the order given, at most `jobs`
/// cells at a time. Failed cells are kept with their error.
///
/// When `p = q` and `cfg.lambda_fa` is unset, `λ_{f(a)}` is computed once
/// per θ rather than once per cell.
pub fn run_sweep(spec: &SweepSpec, cfg: &SolveConfig, jobs: usize) -> Result<Vec<SweepCell>> {
    let mesh = spec.mesh()?;
    let mut problems = Vec::new();
    for &theta in &spec.thetas {
        let mut c = cfg.clone();
        if spec.p == spec.q && c.lambda_fa.is_none() {
            let fa = spec.problem(&mesh, theta, 1.0)?.f_of_a();
            c.lambda_fa = Some(weighted_first_eigenvalue(&mesh, spec.p, &fa)?);
        }
        for &eps in &spec.eps {
            problems.push((spec.problem(&mesh, theta, eps)?, c.clone()));
        }
    }
    Ok(par::run_jobs(&problems, jobs.max(1), |(p, c)| solve_cell(p, c)))
}

/// Slope of `log W` against `log ε` for one `θ`, skipping failed cells and
/// layers thinner than two mesh spacings.
pub fn scaling_fit(rows: &[SweepRow], theta: f64, h: f64) -> Result<ScalingFit> {
    let samples: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.theta == theta && r.classification != Classification::Failed)
        .map(|r| (r.eps, r.width))
        .collect();
    fit_scaling_resolved(&samples, 2.0 * h)
}

/// One row per `θ` at a single `ε`.
pub fn dichotomy_experiment(spec: &SweepSpec, thetas: &[f64], eps: f64, cfg: &SolveConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    let s = SweepSpec { thetas: thetas.to_vec(), eps: vec![eps], ..spec.clone() };
    Ok(run_sweep(&s, cfg, jobs)?.into_iter().map(|c| c.row).collect())
}

/// Deepest vertex where `u < a - δ`; zero when there is none.
pub fn sandwich_depth(sol: &MainSolution, delta: f64) -> f64 {
    let m = sol.gap.mesh();
    (0..m.n_vertices()).filter(|&i| sol.gap.values()[i] > delta).map(|i| m.dist_to_boundary(i)).fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct SandwichCheck {
    pub eps: f64,
    /// `min (u - a + δ)` over `Ω_{Kε^{1/p}}`.
    pub lower_margin: f64,
    /// `max (u - a)` over all vertices.
    pub upper_excess: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct SandwichReport {
    pub delta: f64,
    pub k: f64,
    /// `(ε, depth/ε^{1/p})` of the cells `K` was fitted on.
    pub training: Vec<(f64, f64)>,
    pub checks: Vec<SandwichCheck>,
    pub pass: bool,
}

/// Fit `K` as the largest `depth/ε^{1/p}` over cells with `ε > eps_star`,
/// then check `a - δ ≤ u ≤ a + upper_tol` on `Ω_{Kε^{1/p}}` for every cell
/// with `ε ≤ eps_star`.
pub fn sandwich_experiment(cells: &[SweepCell], delta: f64, eps_star: f64, upper_tol: f64) -> Result<SandwichReport> {
    let mut training = Vec::new();
    let mut held_out = Vec::new();
    for c in cells {
        let Some(sol) = &c.solution else {
            return Err(Error::InsufficientData(format!("cell eps = {:e} failed to solve", c.row.eps)));
        };
        if c.row.eps > eps_star {
            let p = c.problem.exponents.p;
            training.push((c.row.eps, sandwich_depth(sol, delta) / c.row.eps.powf(1.0 / p)));
        } else {
            held_out.push((c, sol));
        }
    }
    if training.is_empty() || held_out.is_empty() {
        return Err(Error::InsufficientData("sandwich needs cells on both sides of eps_star".into()));
    }
    let k = training.iter().map(|t| t.1).fold(0.0, f64::max);
    let mut checks = Vec::new();
    for (c, sol) in held_out {
        let m = sol.gap.mesh();
        let radius = k * c.row.eps.powf(1.0 / c.problem.exponents.p);
        let v = sol.gap.values();
        let lower_margin =
            (0..m.n_vertices()).filter(|&i| m.dist_to_boundary(i) >= radius).map(|i| delta - v[i]).fold(f64::INFINITY, f64::min);
        let upper_excess = v.iter().map(|&g| -g).fold(f64::NEG_INFINITY, f64::max);
        let pass = lower_margin >= 0.0 && upper_excess <= upper_tol;
        checks.push(SandwichCheck { eps: c.row.eps, lower_margin, upper_excess, pass });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(SandwichReport { delta, k, training, checks, pass })
}

/// `ã(y) = a(x₀ + ε^{1/p} y)` on `mesh`.
pub fn scaled_coefficient(mesh: Arc<Mesh>, a0: f64, slope: Point, x0: Point, eps: f64, p: f64) -> Result<ScalarField> {
    let s = eps.powf(1.0 / p);
    ScalarField::from_fn(mesh, |y| a0 + slope[0] * (x0[0] + s * y[0]) + slope[1] * (x0[1] + s * y[1]))
}

/// Absorption runs on the unit disk around `x0` for a problem with
/// `a = a0 + slope·x` and the given `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxSetup {
    pub rings: usize,
    pub sectors: usize,
    pub a0: f64,
    pub slope: Point,
    pub x0: Point,
    pub eps: f64,
    pub lambda: f64,
    pub p: f64,
}

impl Default for AuxSetup {
    fn default() -> Self {
        AuxSetup { rings: 32, sectors: 6, a0: 1.0, slope: [0.1, 0.0], x0: [0.5, 0.5], eps: 1e-3, lambda: 1.0, p: 2.0 }
    }
}

#[derive(Clone, Debug)]
pub struct AuxRow {
    pub theta: f64,
    pub delta: f64,
    pub min_w: f64,
    pub max_w: f64,
    /// `E_T(1)` and the bound `Λδ^{1+θ}|B₁|`.
    pub total_energy: f64,
    pub energy_bound: f64,
    /// In scaled coordinates; from the energy profile and from `w ≤ τ` pointwise.
    pub radius: f64,
    pub pointwise_radius: f64,
    pub tau: f64,
    pub profile: Option<EnergyProfile>,
    pub error: Option<String>,
}

impl AuxRow {
    /// `0 ≤ w ≤ δ` and `E_T(1) ≤ bound` up to `rel` relative slack.
    pub fn bounds_hold(&self, rel: f64) -> bool {
        self.error.is_none()
            && self.min_w >= -rel * self.delta
            && self.max_w <= self.delta * (1.0 + rel)
            && self.total_energy <= self.energy_bound * (1.0 + rel)
    }
}

impl AuxSetup {
    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        Ok(Arc::new(build_disk_mesh(self.rings, self.sectors)?))
    }

    /// Mesh spacing of the radial direction, the resolution of a radius.
    pub fn h(&self) -> f64 {
        1.0 / self.rings as f64
    }

    /// Vanishing tolerance `max(10⁻⁶ ã_max, 10·newton_tol)`, the main solver's `τ_c`.
    pub fn run(&self, mesh: &Arc<Mesh>, theta: f64, delta: f64, cfg: &SolveConfig) -> AuxRow {
        let mut row = AuxRow {
            theta,
            delta,
            min_w: f64::NAN,
            max_w: f64::NAN,
            total_energy: f64::NAN,
            energy_bound: f64::NAN,
            radius: f64::NAN,
            pointwise_radius: f64::NAN,
            tau: f64::NAN,
            profile: None,
            error: None,
        };
        let out = (|| {
            let a_tilde = scaled_coefficient(mesh.clone(), self.a0, self.slope, self.x0, self.eps, self.p)?;
            let spec = AuxiliarySpec::new(delta, self.lambda, Exponents::new(self.p, self.p.min(2.0), theta)?)?;
            let tau = (1e-6 * a_tilde.max()).max(10.0 * cfg.newton_tol);
            let sol = solve_auxiliary(&spec, &a_tilde, cfg)?;
            let prof = energy_profile(&sol.w, &a_tilde, &spec, self.rings)?;
            row.min_w = sol.min_w;
            row.max_w = sol.max_w;
            row.total_energy = *prof.e_t.last().unwrap();
            row.energy_bound = spec.lambda * delta.powf(1.0 + theta) * mesh.total_area();
            // A cell counts as dead when its mean energy density is at most
            // that of w ≡ τ.
            row.radius = deadcore_radius(&prof, spec.lambda * tau.powf(1.0 + theta));
            row.pointwise_radius = pointwise_core_radius(&sol.w, tau);
            row.tau = tau;
            row.profile = Some(prof);
            Ok::<_, Error>(())
        })();
        if let Err(e) = out {
            row.error = Some(e.to_string());
        }
        row
    }
}

#[derive(Clone, Debug)]
pub struct RadiusFit {
    pub m: f64,
    /// `(δ, measured, predicted)` for the held-out runs.
    pub held_out: Vec<(f64, f64, f64)>,
    pub pass: bool,
}

/// Fit `M` on the `train` runs with a core and check `radius ≥ predicted - h` on `test`. A
/// held-out δ without a predicted core (`Mδ^{(1+θ)γ} ≥ 1`) only needs a
/// nonnegative radius.
pub fn fit_radius_bound(train: &[AuxRow], test: &[AuxRow], pack: &ExponentPack, h: f64) -> Result<RadiusFit> {
    // A run without a core lies outside the formula's domain and says
    // nothing about M.
    let samples: Vec<(f64, f64)> =
        train.iter().filter(|r| r.error.is_none() && r.radius > 0.0).map(|r| (r.delta, r.radius)).collect();
    let m = fit_m(&samples, pack.theta, pack.gamma, pack.tau)?;
    let mut held_out = Vec::new();
    let mut pass = true;
    for r in test {
        if r.error.is_some() {
            pass = false;
            continue;
        }
        let pred = predicted_radius(r.delta, m, pack.theta, pack.gamma, pack.tau).unwrap_or(0.0);
        pass &= r.radius >= pred - h;
        held_out.push((r.delta, r.radius, pred));
    }
    Ok(RadiusFit { m, held_out, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p: f64) -> SweepSpec {
        SweepSpec { nx: 16, ny: 16, eps: vec![1e-2, 1e-3], thetas: vec![0.5, 1.5], ..SweepSpec::scaling(p) }
    }

    #[test]
    fn sweep_order_and_classification() {
        let cells = run_sweep(&small(2.0), &SolveConfig::default(), 2).unwrap();
        let keys: Vec<(f64, f64)> = cells.iter().map(|c| (c.row.theta, c.row.eps)).collect();
        assert_eq!(keys, vec![(0.5, 1e-2), (0.5, 1e-3), (1.5, 1e-2), (1.5, 1e-3)]);
        assert!(cells.iter().all(|c| c.row.error.is_none()), "{:?}", cells.iter().map(|c| &c.row.error).collect::<Vec<_>>());
        assert_eq!(cells[1].row.classification, Classification::Nonempty);
        assert_eq!(cells[3].row.classification, Classification::Empty);
    }

    #[test]
    fn sequential_and_parallel_sweeps_agree() {
        let s = SweepSpec { thetas: vec![0.5], ..small(2.0) };
        let a = run_sweep(&s, &SolveConfig::default(), 1).unwrap();
        let b = run_sweep(&s, &SolveConfig::default(), 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.row, y.row);
        }
    }

    #[test]
    fn scaled_coefficient_matches_affine() {
        let m = Arc::new(build_disk_mesh(4, 6).unwrap());
        let at = scaled_coefficient(m.clone(), 1.0, [0.1, 0.0], [0.5, 0.5], 1e-2, 2.0).unwrap();
        for (i, &y) in m.vertices().iter().enumerate() {
            assert!((at.values()[i] - (1.05 + 0.01 * y[0])).abs() < 1e-15);
        }
    }

    #[test]
    fn failed_cells_are_kept() {
        // p = q with eps beyond the existence threshold.
        let s = SweepSpec { nx: 8, ny: 8, eps: vec![1.0], thetas: vec![0.5], ..SweepSpec::scaling(2.0) };
        let cells = run_sweep(&s, &SolveConfig::default(), 1).unwrap();
        assert_eq!(cells[0].row.classification, Classification::Failed);
        assert!(cells[0].row.error.is_some());
    }
}
