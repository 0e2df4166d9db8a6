use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypokinetic"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn spec(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

#[test]
fn check_wronskian_passes_and_writes_manifest() {
    let dir = TempDir::new().unwrap();
    let s = spec("chain2.json");
    let o = run(
        &["check-wronskian", "--spec", &s, "--trials", "20"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(dir.path().join("check-wronskian.json"));
    assert!(report["report"]["max_relative_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(report["pass"], true);
    let manifest = json(dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "check-wronskian");
    assert_eq!(manifest["exit_code"], 0);
}

#[test]
fn coincident_alphas_are_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let o = run(
        &["check-wronskian", "--spec", &s, "--alphas", "-0.5,-0.5"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    let e = spec("endpoints-k1.txt");
    let o = run(
        &[
            "trajectory",
            "--spec",
            &s,
            "--endpoints",
            &e,
            "--alphas",
            "-0.4,-0.4",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn trajectory_outputs() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let e = spec("endpoints-k1.txt");
    let o = run(
        &[
            "trajectory",
            "--spec",
            &s,
            "--endpoints",
            &e,
            "--samples",
            "11",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,t,x0_0,x1_0");
    assert_eq!(lines.len(), 12);
    let diag = json(dir.path().join("trajectory.json"));
    assert!(diag["endpoint_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn time_degenerate_endpoints_fail_numerically() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let e = write(&dir, "same-time.txt", "0.1, 0.2, -1.0\n0.3, 0.4, -1.0\n");
    let o = run(&["trajectory", "--spec", &s, "--endpoints", &e], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let bad_endpoints = write(&dir, "bad.txt", "0.1, zero, -1.0\n0.3, 0.4, -3.0\n");
    let o = run(
        &["trajectory", "--spec", &s, "--endpoints", &bad_endpoints],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let short = write(&dir, "short.txt", "0.1, -1.0\n0.3, -3.0\n");
    let o = run(
        &["trajectory", "--spec", &s, "--endpoints", &short],
        dir.path(),
    );
    assert_eq!(code(&o), 2);

    let bad_spec = write(
        &dir,
        "spec.json",
        r#"{"kappa":1,"beta":1.0,"dims":[1,1],"blocks":[[1.0,2.0]],"lambda":1.0}"#,
    );
    let o = run(&["check-wronskian", "--spec", &bad_spec], dir.path());
    assert_eq!(code(&o), 2);
    let unknown = write(
        &dir,
        "unknown.json",
        r#"{"kappa":1,"beta":1.0,"dims":[1,1],"blocks":[[1.0]],"lambda":1.0,"x":0}"#,
    );
    let o = run(&["check-wronskian", "--spec", &unknown], dir.path());
    assert_eq!(code(&o), 2);

    let o = run(
        &["check-wronskian", "--spec", "/nonexistent/spec.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let o = run(&["check-wronskian"], dir.path());
    assert_eq!(code(&o), 2);

    let cfg = write(
        &dir,
        "ensemble.json",
        r#"{"n_runs":2,"lambda":0.5,"cells":[16,16],"lattice":[4,4]}"#,
    );
    let o = run(&["poincare", "--spec", &s, "--config", &cfg], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn fractional_poincare_is_unsupported() {
    let dir = TempDir::new().unwrap();
    let s = spec("fractional.json");
    let cfg = spec("ensemble-desk.json");
    let o = run(&["poincare", "--spec", &s, "--config", &cfg], dir.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
    // geometry and trajectories still work in the fractional case
    let e = spec("endpoints-k1.txt");
    let o = run(&["trajectory", "--spec", &s, "--endpoints", &e], dir.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn poincare_desk_ensemble() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let cfg = spec("ensemble-desk.json");
    let o = run(
        &["poincare", "--spec", &s, "--config", &cfg, "--seed", "3"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("poincare-summary.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    // 5 runs, two exponents each
    assert_eq!(rows.len(), 10);
    for row in &rows {
        let ratio = row.split(',').nth(7).unwrap();
        assert!(ratio.parse::<f64>().unwrap().is_finite(), "{row}");
        assert!(row.ends_with(",ok"), "{row}");
    }
    for run in 0..5 {
        assert!(dir
            .path()
            .join(format!("poincare/run-{run:03}.json"))
            .exists());
    }
}

#[test]
fn solve_reference_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let o = run(&["solve", "--spec", &s], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(dir.path().join("solve.json"));
    assert!(report["oracle"]["relative_l1"].as_f64().unwrap() <= 0.05);
    let csv = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 64 * 64);
}

#[test]
fn solve_rough_writes_snapshots() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let cfg = spec("solve-rough.json");
    let o = run(&["solve", "--spec", &s, "--config", &cfg], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snaps = std::fs::read_dir(dir.path().join("snapshots"))
        .unwrap()
        .count();
    assert_eq!(snaps, 4);
    let report = json(dir.path().join("solve.json"));
    assert!(report["oracle"].is_null());
    assert!(report["min"].as_f64().unwrap() >= 0.0);
}

#[test]
fn solve_refuses_unstable_step() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let cfg = write(
        &dir,
        "fast.json",
        r#"{"half":[4.0,3.0],"cells":[64,64],"sigma":[0.5,1.0],"horizon":1.0,"steps":10}"#,
    );
    let o = run(&["solve", "--spec", &s, "--config", &cfg], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_moments() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    let o = run(
        &["simulate", "--spec", &s, "--paths", "20000", "--seed", "5"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(dir.path().join("moments.json"));
    let cov = m["covariance"].as_array().unwrap();
    // internal order (v, x): Var V = 1, Var X = 1/3, Cov = 1/2
    let c = |i: usize, j: usize| cov[i].as_array().unwrap()[j].as_f64().unwrap();
    assert!((c(0, 0) - 1.0).abs() < 0.05);
    assert!((c(1, 1) - 1.0 / 3.0).abs() < 0.02);
    assert!((c(0, 1) - 0.5).abs() < 0.03);
    let terminal = std::fs::read_to_string(dir.path().join("terminal.csv")).unwrap();
    assert_eq!(terminal.lines().count(), 20001);
}

#[test]
fn pure_transport_pair_needs_no_control() {
    let dir = TempDir::new().unwrap();
    let s = spec("kolmogorov.json");
    // x^(1) advances by v·δ = 0.5·2 with the velocity held fixed
    let e = write(&dir, "transport.txt", "0.0, 0.5, -4.5\n1.0, 0.5, -2.5\n");
    let o = run(&["trajectory", "--spec", &s, "--endpoints", &e], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let diag = json(dir.path().join("trajectory.json"));
    assert_eq!(diag["pure_transport"], true);
    let m = diag["control_coefficients"].as_array().unwrap();
    assert!(m.iter().all(|c| c.as_f64().unwrap().abs() < 1e-12), "{m:?}");
}
