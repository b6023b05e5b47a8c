use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use flatcore::deadcore::{detect_coincidence_gap, fit_scaling_resolved, ScalingFit};
use flatcore::experiments::{run_sweep, AuxSetup, Classification, SweepSpec};
use flatcore::mesh::io::write_field;
use flatcore::mesh::{build_disk_mesh, build_rect_mesh, Mesh, ScalarField};
use flatcore::output::{
    coincidence_to_log, write_atomic, write_aux_csv, write_fit_csv, write_profile_csv, write_sweep_csv, LogLogPlot, Series,
};
use flatcore::par;
use flatcore::plap::{Exponents, Nonlinearity};
use flatcore::solver::{solve_main, ProblemSpec};
use flatcore::spectral::{eps_threshold, first_eigenpair, weighted_first_eigenvalue};
use flatcore::verify::run_all;
use flatcore::Error;

use crate::config::{Domain, RunConfig};

fn build_mesh(cfg: &RunConfig) -> Result<Arc<Mesh>> {
    let m = &cfg.mesh;
    let mesh = match m.domain {
        Domain::Rect => build_rect_mesh(m.lx, m.ly, m.nx, m.ny())?,
        Domain::Disk => build_disk_mesh(m.rings, m.sectors)?,
    };
    Ok(Arc::new(mesh))
}

fn problem(cfg: &RunConfig, mesh: &Arc<Mesh>) -> Result<ProblemSpec> {
    let pr = &cfg.problem;
    let ex = Exponents::new(pr.p, pr.q(), pr.theta)?;
    let f = Nonlinearity::new(pr.theta, pr.c)?;
    Ok(ProblemSpec::new(mesh.clone(), pr.a0, pr.slope, ex, f, pr.eps, pr.degenerate)?)
}

fn field_bytes(f: &ScalarField) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_field(&mut buf, f)?;
    Ok(buf)
}

fn put(out: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = out.join(name);
    write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn header(spec: &ProblemSpec) -> String {
    let ex = spec.exponents;
    format!("p {}\nq {}\ntheta {}\neps {:e}\nvertices {}\n", ex.p, ex.q, ex.theta, spec.eps, spec.mesh.n_vertices())
}

pub fn solve(cfg: &RunConfig) -> Result<bool> {
    let out = &cfg.run.out;
    let mesh = build_mesh(cfg)?;
    let spec = problem(cfg, &mesh)?;
    let scfg = cfg.solver.to_config();
    match solve_main(&spec, &scfg) {
        Ok(sol) => {
            let rep = detect_coincidence_gap(&sol.gap, spec.tau_c(&scfg))?;
            put(out, "solution.field", &field_bytes(&sol.u)?)?;
            put(out, "solve_report.log", format!("status ok\n{}{}", header(&spec), sol.report.to_log()).as_bytes())?;
            put(out, "coincidence.log", coincidence_to_log(&rep).as_bytes())?;
            println!(
                "solved: residual {:.3e}, {} iterations, coincidence measure {:.6}, W {:.6}",
                sol.report.final_residual, sol.report.iterations, rep.measure, rep.width
            );
            Ok(true)
        }
        Err(e) => {
            let mut log = format!("status failed\n{}error {e}\n", header(&spec));
            if let Error::ConvergenceFailure { last_iterate: Some(v), .. } = &e {
                let gap = ScalarField::new(mesh.clone(), v.clone())?;
                put(out, "solution.partial.field", &field_bytes(&gap)?)?;
                log.push_str("partial solution.partial.field holds the last gap iterate a - u\n");
            }
            put(out, "solve_report.log", log.as_bytes())?;
            Err(e.into())
        }
    }
}

/// What the fits and the summary need from a sweep row.
#[derive(Clone, Debug)]
struct Row {
    p: f64,
    theta: f64,
    eps: f64,
    width: f64,
    class: String,
}

fn h_of(cfg: &RunConfig) -> f64 {
    match cfg.mesh.domain {
        Domain::Rect => (cfg.mesh.lx / cfg.mesh.nx as f64).max(cfg.mesh.ly / cfg.mesh.ny() as f64),
        Domain::Disk => 1.0 / cfg.mesh.rings as f64,
    }
}

/// Fits, plots and `summary.txt` from sweep rows. Shared by `sweep` and
/// `report`, so a report over an unchanged sweep.csv reproduces them.
fn emit_fits(rows: &[Row], h: f64, out: &Path) -> Result<()> {
    let mut groups: BTreeMap<(u64, u64), Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.p.to_bits(), r.theta.to_bits())).or_default().push(r);
    }
    let mut summary = String::from("p theta eps W classification\n");
    for r in rows {
        let _ = writeln!(summary, "{} {} {:e} {:.6e} {}", r.p, r.theta, r.eps, r.width, r.class);
    }
    summary.push('\n');
    let mut series = Vec::new();
    let mut fits: Vec<(String, ScalingFit)> = Vec::new();
    for ((p, theta), g) in &groups {
        let (p, theta) = (f64::from_bits(*p), f64::from_bits(*theta));
        let label = format!("p={p} theta={theta}");
        let samples: Vec<(f64, f64)> = g.iter().filter(|r| r.class != "failed").map(|r| (r.eps, r.width)).collect();
        let counts = |c: &str| g.iter().filter(|r| r.class == c).count();
        let _ = writeln!(
            summary,
            "{label}: nonempty {} empty {} failed {}",
            counts("nonempty"),
            counts("empty"),
            counts("failed")
        );
        match fit_scaling_resolved(&samples, 2.0 * h) {
            Ok(fit) => {
                let _ = writeln!(summary, "  slope {:.6} intercept {:.6} r2 {:.6} n {}", fit.slope, fit.intercept, fit.r2, fit.samples.len());
                let mut buf = Vec::new();
                write_fit_csv(&mut buf, &fit)?;
                put(out, &format!("fit_p{p}_theta{theta}.csv"), &buf)?;
                fits.push((label.clone(), fit));
            }
            Err(e) => {
                let _ = writeln!(summary, "  no fit: {e}");
            }
        }
        series.push(Series { label, points: samples.into_iter().filter(|s| s.1 > 0.0).collect() });
    }
    let plot = LogLogPlot {
        title: "layer width W against eps".into(),
        x_label: "eps".into(),
        y_label: "W".into(),
        series,
        fit: if fits.len() == 1 { Some((fits[0].1.slope, fits[0].1.intercept)) } else { None },
    };
    put(out, "scaling.svg", plot.to_svg().as_bytes())?;
    for (label, fit) in &fits {
        let one = LogLogPlot {
            title: format!("W against eps, {label}"),
            x_label: "eps".into(),
            y_label: "W".into(),
            series: vec![Series { label: format!("{label}, slope {:.3}", fit.slope), points: fit.samples.clone() }],
            fit: Some((fit.slope, fit.intercept)),
        };
        put(out, &format!("scaling_{}.svg", label.replace(['=', ' '], "_")), one.to_svg().as_bytes())?;
    }
    put(out, "summary.txt", summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<bool> {
    let out = &cfg.run.out;
    let scfg = cfg.solver.to_config();
    if cfg.mesh.domain != Domain::Rect {
        bail!("sweep runs on the rectangle mesh (mesh.domain = \"rect\")");
    }
    std::fs::create_dir_all(out.join("cells"))?;
    let mut all = Vec::new();
    for p in cfg.sweep_ps() {
        let spec = SweepSpec {
            lx: cfg.mesh.lx,
            ly: cfg.mesh.ly,
            nx: cfg.mesh.nx,
            ny: cfg.mesh.ny(),
            a0: cfg.problem.a0,
            slope: cfg.problem.slope,
            p,
            q: cfg.problem.q.unwrap_or(p.min(2.0)),
            c: cfg.problem.c,
            degenerate: cfg.problem.degenerate,
            thetas: cfg.sweep.theta.clone(),
            eps: cfg.sweep.eps.clone(),
        };
        let cells = run_sweep(&spec, &scfg, cfg.run.jobs)?;
        let logs: Vec<Result<()>> = par::run_jobs(&cells, cfg.run.jobs, |c| {
            let r = &c.row;
            let mut log = header(&c.problem);
            match (&c.solution, &r.error) {
                (Some(sol), _) => {
                    let rep = detect_coincidence_gap(&sol.gap, r.tau_c)?;
                    log.push_str("status ok\n");
                    log.push_str(&coincidence_to_log(&rep));
                    log.push_str(&sol.report.to_log());
                }
                (None, e) => {
                    let _ = writeln!(log, "status failed\nerror {}", e.as_deref().unwrap_or("unknown"));
                }
            }
            put(&out.join("cells"), &format!("p{}_theta{}_eps{:e}.log", r.p, r.theta, r.eps), log.as_bytes())
        });
        for l in logs {
            l?;
        }
        all.extend(cells.into_iter().map(|c| c.row));
    }
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &all)?;
    put(out, "sweep.csv", &csv)?;
    let rows: Vec<Row> = all
        .iter()
        .map(|r| Row { p: r.p, theta: r.theta, eps: r.eps, width: r.width, class: r.classification.to_string() })
        .collect();
    emit_fits(&rows, h_of(cfg), out)?;
    for r in all.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell p={} theta={} eps={:e} failed: {}", r.p, r.theta, r.eps, r.error.as_deref().unwrap_or(""));
    }
    Ok(all.iter().any(|r| r.classification != Classification::Failed))
}

pub fn report(cfg: &RunConfig) -> Result<bool> {
    let out = &cfg.run.out;
    let path = out.join("sweep.csv");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == "theta,p,q,eps,measure,W,min_interior_gap,classification" => {}
        _ => bail!("{}: not a sweep file (missing header)", path.display()),
    }
    for (k, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            bail!("{}:{}: expected 8 columns, found {}", path.display(), k + 1, f.len());
        }
        let num = |i: usize| f[i].parse::<f64>().with_context(|| format!("{}:{}: column {}", path.display(), k + 1, i + 1));
        rows.push(Row { theta: num(0)?, p: num(1)?, eps: num(3)?, width: num(5)?, class: f[7].to_string() });
    }
    if rows.is_empty() {
        bail!("{}: no rows", path.display());
    }
    emit_fits(&rows, h_of(cfg), out)?;
    Ok(true)
}

pub fn eigen(cfg: &RunConfig) -> Result<bool> {
    let out = &cfg.run.out;
    let mesh = build_mesh(cfg)?;
    let p = cfg.problem.p;
    let e = first_eigenpair(&mesh, p)?;
    let mut log = format!(
        "p {p}\nvertices {}\nlambda1 {:.12e}\nresidual {:.3e}\niterations {}\n",
        mesh.n_vertices(),
        e.lambda1,
        e.residual,
        e.rayleigh_history.len()
    );
    if cfg.problem.q() == p {
        let spec = problem(cfg, &mesh)?;
        let lw = weighted_first_eigenvalue(&mesh, p, &spec.f_of_a())?;
        let _ = writeln!(log, "lambda_fa {lw:.12e}\neps_a {:.12e}", eps_threshold(p, p, lw)?);
    } else {
        log.push_str("eps_a inf\n");
    }
    put(out, "eigen.log", log.as_bytes())?;
    put(out, "eigenfunction.field", &field_bytes(&e.z)?)?;
    print!("{log}");
    Ok(true)
}

pub fn aux(cfg: &RunConfig) -> Result<bool> {
    let out = &cfg.run.out;
    let a = &cfg.aux;
    let setup = AuxSetup {
        rings: a.rings,
        sectors: a.sectors,
        a0: cfg.problem.a0,
        slope: cfg.problem.slope,
        x0: a.x0,
        eps: a.eps,
        lambda: a.lambda,
        p: cfg.problem.p,
    };
    let mesh = setup.mesh()?;
    let scfg = cfg.solver.to_config();
    let cases: Vec<(f64, f64)> = a.theta.iter().flat_map(|&t| a.delta.iter().map(move |&d| (t, d))).collect();
    let rows = par::run_jobs(&cases, cfg.run.jobs, |&(t, d)| setup.run(&mesh, t, d, &scfg));
    let mut csv = Vec::new();
    write_aux_csv(&mut csv, &rows)?;
    put(out, "aux.csv", &csv)?;
    let mut ok = true;
    for r in &rows {
        match (&r.profile, &r.error) {
            (Some(prof), None) => {
                let mut buf = Vec::new();
                write_profile_csv(&mut buf, prof)?;
                put(out, &format!("profile_theta{}_delta{:e}.csv", r.theta, r.delta), &buf)?;
                println!(
                    "theta {} delta {:e}: w in [{:.3e}, {:.3e}], E_T {:.4e} <= {:.4e}, core radius {:.4}",
                    r.theta, r.delta, r.min_w, r.max_w, r.total_energy, r.energy_bound, r.radius
                );
            }
            (_, e) => {
                ok = false;
                eprintln!("theta {} delta {:e} failed: {}", r.theta, r.delta, e.as_deref().unwrap_or("unknown"));
            }
        }
    }
    Ok(ok)
}

pub fn verify(cfg: &RunConfig) -> Result<bool> {
    let reports = run_all(&cfg.verify_options());
    let mut log = String::new();
    for r in &reports {
        log.push_str(&r.summary());
        log.push('\n');
    }
    put(&cfg.run.out, "verify.log", log.as_bytes())?;
    print!("{log}");
    Ok(reports.iter().all(|r| r.pass))
}
