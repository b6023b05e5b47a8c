//! Run configuration.
//!
//! The file is TOML. Unknown sections or keys are errors. Every key has a
//! default, so an empty file is a valid configuration.
//!
//! ```text
//! [run]      out = "out"   seed = 1   jobs = 1
//! [problem]  p = 2.0   q = 2.0   theta = 0.5   c = 1.0   a0 = 1.0
//!            slope = [0.1, 0.0]   eps = 1e-3   degenerate = false
//! [mesh]     domain = "rect" | "disk"   nx = 64   ny = 64   lx = 1.0   ly = 1.0
//!            rings = 32   sectors = 6
//! [sweep]    eps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]   theta = [0.5]   p = []
//! [solver]   newton_tol = 1e-8   accept_tol = 1e-6   max_outer = 600
//!            picard_steps = 20   sigma = 1.0   mu = ...   lambda_fa = ...
//! [aux]      theta = [0.5]   delta = [1e-2, 1e-3]   lambda = 1.0   eps = 1e-3
//!            x0 = [0.5, 0.5]   rings = 32   sectors = 6
//! [verify]   lemma_samples = 100000   exponent_tuples = 100
//!            comparison_pairs = 100   comparison_cells = 32   perturb_lemma = 1.0
//! ```
//!
//! `q` defaults to `min(p, 2)`, `ny` to `nx`, an empty sweep `p` list to
//! `[problem.p]`, and `mu` to the solver's own choice for `p`. Command-line
//! flags are applied after the file.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use flatcore::experiments::SCALING_EPS;
use flatcore::solver::SolveConfig;
use flatcore::verify::VerifyOptions;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub problem: ProblemSection,
    pub mesh: MeshSection,
    pub sweep: SweepSection,
    pub solver: SolverSection,
    pub aux: AuxSection,
    pub verify: VerifySection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { out: PathBuf::from("out"), seed: 1, jobs: 1 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub p: f64,
    pub q: Option<f64>,
    pub theta: f64,
    pub c: f64,
    pub a0: f64,
    pub slope: [f64; 2],
    pub eps: f64,
    pub degenerate: bool,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection { p: 2.0, q: None, theta: 0.5, c: 1.0, a0: 1.0, slope: [0.1, 0.0], eps: 1e-3, degenerate: false }
    }
}

impl ProblemSection {
    pub fn q(&self) -> f64 {
        self.q.unwrap_or(self.p.min(2.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Rect,
    Disk,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub domain: Domain,
    pub nx: usize,
    pub ny: Option<usize>,
    pub lx: f64,
    pub ly: f64,
    pub rings: usize,
    pub sectors: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { domain: Domain::Rect, nx: 64, ny: None, lx: 1.0, ly: 1.0, rings: 32, sectors: 6 }
    }
}

impl MeshSection {
    pub fn ny(&self) -> usize {
        self.ny.unwrap_or(self.nx)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { eps: SCALING_EPS.to_vec(), theta: vec![0.5], p: Vec::new() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub accept_tol: f64,
    pub max_outer: usize,
    pub picard_steps: usize,
    pub sigma: f64,
    pub mu: Option<f64>,
    pub lambda_fa: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveConfig::default();
        SolverSection {
            newton_tol: d.newton_tol,
            accept_tol: d.accept_tol,
            max_outer: d.max_outer,
            picard_steps: d.picard_steps,
            sigma: d.sigma,
            mu: d.mu,
            lambda_fa: d.lambda_fa,
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolveConfig {
        SolveConfig {
            newton_tol: self.newton_tol,
            accept_tol: self.accept_tol,
            max_outer: self.max_outer,
            picard_steps: self.picard_steps,
            sigma: self.sigma,
            mu: self.mu,
            lambda_fa: self.lambda_fa,
            ..SolveConfig::default()
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuxSection {
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub lambda: f64,
    pub eps: f64,
    pub x0: [f64; 2],
    pub rings: usize,
    pub sectors: usize,
}

impl Default for AuxSection {
    fn default() -> Self {
        AuxSection { theta: vec![0.5], delta: vec![1e-2, 1e-3], lambda: 1.0, eps: 1e-3, x0: [0.5, 0.5], rings: 32, sectors: 6 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub lemma_samples: usize,
    pub exponent_tuples: usize,
    pub comparison_pairs: usize,
    pub comparison_cells: usize,
    pub perturb_lemma: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let d = VerifyOptions::default();
        VerifySection {
            lemma_samples: d.lemma_samples,
            exponent_tuples: d.exponent_tuples,
            comparison_pairs: d.comparison_pairs,
            comparison_cells: d.comparison_cells,
            perturb_lemma: d.lemma_perturb,
        }
    }
}

impl RunConfig {
    /// Parse `text`; diagnostics name `origin`, the line and the column.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            anyhow!("{origin}:{line}:{col}: {}", e.message())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn sweep_ps(&self) -> Vec<f64> {
        if self.sweep.p.is_empty() {
            vec![self.problem.p]
        } else {
            self.sweep.p.clone()
        }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            seed: self.run.seed,
            lemma_samples: self.verify.lemma_samples,
            exponent_tuples: self.verify.exponent_tuples,
            comparison_pairs: self.verify.comparison_pairs,
            comparison_cells: self.verify.comparison_cells,
            lemma_perturb: self.verify.perturb_lemma,
            ..VerifyOptions::default()
        }
    }

    /// Range checks that the library would otherwise report deep inside a run.
    pub fn check(&self) -> Result<()> {
        if self.run.jobs == 0 {
            bail!("run.jobs must be at least 1");
        }
        if self.mesh.nx == 0 || self.mesh.ny() == 0 {
            bail!("mesh.nx and mesh.ny must be positive");
        }
        if self.sweep.eps.is_empty() || self.sweep.theta.is_empty() {
            bail!("sweep.eps and sweep.theta must not be empty");
        }
        if let Some(e) = self.sweep.eps.iter().find(|e| !(**e > 0.0)) {
            bail!("sweep.eps entries must be positive, got {e}");
        }
        self.solver.to_config().validate()?;
        Ok(())
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// `NX` or `NX,NY`.
pub fn parse_mesh(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad mesh size {t:?}: {e}"));
    match parts.as_slice() {
        [n] => Ok((num(n)?, num(n)?)),
        [nx, ny] => Ok((num(nx)?, num(ny)?)),
        _ => Err(format!("expected NX or NX,NY, got {s:?}")),
    }
}
