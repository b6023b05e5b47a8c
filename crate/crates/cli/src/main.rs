//! `flatcore` command line: solve, sweep, eigen, aux, verify, report.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_mesh, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "flatcore", version, about = "Coincidence sets of singularly perturbed p-Laplacian problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve one problem; writes the field, the solve report and the coincidence report.
    Solve,
    /// Sweep over (p, θ, ε); writes sweep.csv, one fit per (p, θ) and scaling.svg.
    Sweep,
    /// First eigenvalue and, for p = q, the existence threshold.
    Eigen,
    /// Absorption problem on the unit disk over the aux θ and δ lists.
    Aux,
    /// Seeded property suites; exits nonzero when any suite fails.
    Verify,
    /// Rebuild fits, plot and summary from an existing sweep.csv.
    Report,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Configuration file (see the config grammar in the README).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// NX or NX,NY.
    #[arg(long, global = true, value_parser = parse_mesh)]
    mesh: Option<(usize, usize)>,
    /// Comma-separated ε values; the first is used by `solve`.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Comma-separated θ values; the first is used by `solve`.
    #[arg(long, global = true, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Constant coefficient a ≡ a0.
    #[arg(long, global = true)]
    degenerate: bool,
    /// Scale the lower constant of the order lemma (self-test of `verify`).
    #[arg(long, global = true)]
    perturb_lemma: Option<f64>,
}

impl Common {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(o) = &self.out {
            cfg.run.out = o.clone();
        }
        if let Some(j) = self.jobs {
            cfg.run.jobs = j;
        }
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some((nx, ny)) = self.mesh {
            cfg.mesh.nx = nx;
            cfg.mesh.ny = Some(ny);
        }
        if let Some(e) = &self.eps {
            cfg.sweep.eps = e.clone();
            if let Some(&first) = e.first() {
                cfg.problem.eps = first;
            }
        }
        if let Some(t) = &self.theta {
            cfg.sweep.theta = t.clone();
            cfg.aux.theta = t.clone();
            if let Some(&first) = t.first() {
                cfg.problem.theta = first;
            }
        }
        if let Some(p) = self.p {
            cfg.problem.p = p;
            cfg.sweep.p = vec![p];
        }
        if let Some(q) = self.q {
            cfg.problem.q = Some(q);
        }
        if self.degenerate {
            cfg.problem.degenerate = true;
            cfg.problem.slope = [0.0, 0.0];
        }
        if let Some(f) = self.perturb_lemma {
            cfg.verify.perturb_lemma = f;
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.common.apply(&mut cfg);
    cfg.check()?;
    std::fs::create_dir_all(&cfg.run.out)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Eigen => commands::eigen(&cfg),
        Command::Aux => commands::aux(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
