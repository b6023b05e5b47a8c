use std::path::Path;
use std::process::{Command, Output};

fn flatcore(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatcore"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("spawn flatcore")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[mesh]\nnx = 16\n[problem]\ntheta = 0.5\neps = 1e-3\n");
    let o = flatcore(&["solve", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["solution.field", "solve_report.log", "coincidence.log"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let log = std::fs::read_to_string(dir.path().join("solve_report.log")).unwrap();
    assert!(log.starts_with("status ok"));
    let field = std::fs::read_to_string(dir.path().join("solution.field")).unwrap();
    assert!(field.starts_with("flatcore-field 1"));
}

#[test]
fn eps_above_threshold_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatcore(&["solve", "--mesh", "12", "--p", "2", "--q", "2", "--eps", "1.0"], dir.path());
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("eps_a") && e.contains("must be below"), "{e}");
    let log = std::fs::read_to_string(dir.path().join("solve_report.log")).unwrap();
    assert!(log.starts_with("status failed"));
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[problem]\np = 2.0\ntheta = 0.5.1\n");
    let o = flatcore(&["solve", "--config", &cfg], dir.path());
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("run.toml:3:"), "{e}");

    let cfg = write_config(dir.path(), "[solver]\nnewton_tol = 1e-8\nmax_iters = 3\n");
    let o = flatcore(&["solve", "--config", &cfg], dir.path());
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("run.toml:3:") && e.contains("max_iters"), "{e}");
}

#[test]
fn sweep_is_reproducible_and_reports_match() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["sweep", "--mesh", "48", "--p", "2", "--theta", "0.5,1.5", "--eps", "1e-2,3e-3,1e-3,3e-4", "--jobs", "2"];
    let o = flatcore(&args, a.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = flatcore(&args[..args.len() - 2], b.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    for f in ["sweep.csv", "fit_p2_theta0.5.csv", "summary.txt", "scaling.svg"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs between runs");
    }
    let csv = String::from_utf8(read(a.path(), "sweep.csv")).unwrap();
    assert!(csv.starts_with("# flatcore-sweep v1\n"));
    let classes: Vec<&str> = csv.lines().skip(2).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(classes, ["nonempty", "nonempty", "nonempty", "nonempty", "empty", "empty", "empty", "empty"]);
    assert_eq!(std::fs::read_dir(a.path().join("cells")).unwrap().count(), 8);

    let fit = String::from_utf8(read(a.path(), "fit_p2_theta0.5.csv")).unwrap();
    let slope: f64 = fit.lines().last().unwrap().split_whitespace().nth(2).unwrap().trim_start_matches("slope=").parse().unwrap();
    assert!((slope - 0.5).abs() < 0.15, "slope {slope}");

    let before = read(a.path(), "fit_p2_theta0.5.csv");
    std::fs::remove_file(a.path().join("fit_p2_theta0.5.csv")).unwrap();
    let o = flatcore(&["report", "--mesh", "48"], a.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(a.path(), "fit_p2_theta0.5.csv"), before);
}

#[test]
fn verify_passes_and_catches_a_perturbed_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[verify]\nlemma_samples = 20000\ncomparison_pairs = 4\ncomparison_cells = 12\n");
    let o = flatcore(&["verify", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let o = flatcore(&["verify", "--config", &cfg, "--perturb-lemma", "1.01"], dir.path());
    assert!(!o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("FAIL lemma-order")), "{out}");
}

#[test]
fn eigen_on_the_square() {
    let dir = tempfile::tempdir().unwrap();
    let o = flatcore(&["eigen", "--mesh", "32", "--p", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(dir.path().join("eigen.log")).unwrap();
    let l: f64 = log.lines().find_map(|l| l.strip_prefix("lambda1 ")).unwrap().parse().unwrap();
    assert!((l / (2.0 * std::f64::consts::PI.powi(2)) - 1.0).abs() < 0.03, "{l}");
    assert!(log.contains("eps_a "));
}

#[test]
fn aux_writes_table_and_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[aux]\nrings = 12\ntheta = [0.5]\ndelta = [1e-3]\n");
    let o = flatcore(&["aux", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("aux.csv")).unwrap();
    assert!(csv.starts_with("# flatcore-aux v1\n"));
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("profile_theta0.5_delta1e-3.csv").exists());
}
