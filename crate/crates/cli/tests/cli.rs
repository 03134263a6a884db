use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;

use vbsde_cli::commands::{CompareSummary, SolutionSummary};
use vbsde_cli::manifest::Manifest;

fn vbsde(args: &[&str], env_dir: Option<&Path>) -> i32 {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vbsde"));
    cmd.args(args).env_remove("VBSDE_CONFIG_DIR");
    if let Some(d) = env_dir {
        cmd.env("VBSDE_CONFIG_DIR", d);
    }
    cmd.output().unwrap().status.code().unwrap()
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn manifest(dir: &Path) -> Manifest {
    Manifest::from_json(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn oracle_enstrophy_follows_exact_decay_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "single.cfg",
        "psi = sin(1,0)\nn = 16\nnu = 0.1\nhorizon = 0.5\nsteps = 64\noutput_dir = a\n",
    );
    assert_eq!(vbsde(&["oracle", cfg.to_str().unwrap()], None), 0);
    let rows = csv_rows(&tmp.path().join("a/oracle.csv"));
    assert_eq!(rows.len(), 65);
    for r in &rows {
        let exact = 0.5 * (-8.0 * PI * PI * 0.1 * r[0]).exp();
        assert!(
            (r[1] - exact).abs() < 1e-5,
            "tau {} enstrophy {}",
            r[0],
            r[1]
        );
    }
    let m = manifest(&tmp.path().join("a"));
    assert_eq!(m.status, "ok");
    assert!(m.verify(&tmp.path().join("a")).unwrap().is_empty());
    let first = std::fs::read(tmp.path().join("a/oracle.csv")).unwrap();
    assert_eq!(vbsde(&["oracle", cfg.to_str().unwrap()], None), 0);
    assert_eq!(
        first,
        std::fs::read(tmp.path().join("a/oracle.csv")).unwrap()
    );
    assert_eq!(manifest(&tmp.path().join("a")).files, m.files);
}

#[test]
fn zero_data_gives_zero_columns_and_a_trivial_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "psi = 0\nn = 8\nsteps = 4\ninner_branches = 16\nouter_paths = 2\n";
    let cfg = write_cfg(tmp.path(), "zero.cfg", body);
    assert_eq!(vbsde(&["oracle", cfg.to_str().unwrap()], None), 0);
    let out = tmp.path().join("zero.out");
    for r in csv_rows(&out.join("oracle.csv")) {
        assert_eq!(&r[1..], &[0.0, 0.0, 0.0]);
    }
    assert_eq!(vbsde(&["solve", cfg.to_str().unwrap()], None), 0);
    let s: SolutionSummary =
        serde_json::from_slice(&std::fs::read(out.join("solution.json")).unwrap()).unwrap();
    assert!(s.converged);
    assert_eq!(s.y_sup, Some(0.0));
    assert!(manifest(&out)
        .files
        .iter()
        .any(|f| f.path == "diagnostics.json"));
}

#[test]
fn config_errors_exit_2_and_still_write_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "bad.cfg", "psi = 0\nwat = 3\noutput_dir = o\n");
    assert_eq!(vbsde(&["solve", cfg.to_str().unwrap()], None), 2);
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m.status, "config_error");
    assert!(m.error.unwrap().contains("line 2"));

    let missing = tmp.path().join("nope.cfg");
    assert_eq!(vbsde(&["oracle", missing.to_str().unwrap()], None), 2);
    assert_eq!(manifest(&tmp.path().join("nope.out")).exit_code, 2);
}

#[test]
fn tiny_inner_sample_is_a_noise_floor_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "tiny.cfg",
        "psi = sin(1,0) + 0.5*cos(1,1)\nn = 8\nsteps = 4\ninner_branches = 2\nouter_paths = 2\npicard_tol = 1e-9\npicard_tol_mode = absolute\n",
    );
    assert_eq!(vbsde(&["solve", cfg.to_str().unwrap()], None), 2);
    let m = manifest(&tmp.path().join("tiny.out"));
    assert!(m.error.unwrap().contains("inner_branches"));
}

#[test]
fn non_convergence_exits_4_with_ratio_history() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "nc.cfg",
        "psi = sin(1,0) + 0.5*cos(1,1)\nn = 8\nsteps = 4\ninner_branches = 64\nouter_paths = 2\npicard_tol = 1e-9\nmax_iter = 2\n",
    );
    assert_eq!(vbsde(&["solve", cfg.to_str().unwrap()], None), 4);
    let out = tmp.path().join("nc.out");
    let s: SolutionSummary =
        serde_json::from_slice(&std::fs::read(out.join("solution.json")).unwrap()).unwrap();
    assert!(!s.converged);
    assert_eq!(s.iterations, 2);
    assert_eq!(s.ratios.len(), 1);
    assert_eq!(manifest(&out).status, "non_convergence");
}

#[test]
fn unstable_drift_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "big.cfg",
        "psi = 1000*sin(1,0)\nn = 8\nsteps = 4\ninner_branches = 16\nouter_paths = 2\n",
    );
    assert_eq!(vbsde(&["solve", cfg.to_str().unwrap()], None), 3);
    assert_eq!(
        manifest(&tmp.path().join("big.out")).status,
        "numerical_failure"
    );
}

#[test]
fn compare_and_diagnose_on_a_small_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let common = "psi = sin(1,0) + 0.5*cos(1,1)\nn = 8\nnu = 0.5\nhorizon = 0.25\nsteps = 8\ninner_branches = 200\nouter_paths = 4\npath_dump = 2\n";
    let cfg = write_cfg(d, "run.cfg", &format!("{common}output_dir = bundle\n"));
    assert_eq!(vbsde(&["solve", cfg.to_str().unwrap()], None), 0);
    assert!(d.join("bundle/paths/outer_0001.csv").exists());
    let cfg = write_cfg(
        d,
        "oracle.cfg",
        &format!("{common}oracle_steps = 64\noutput_dir = oracle\n"),
    );
    assert_eq!(vbsde(&["oracle", cfg.to_str().unwrap()], None), 0);

    let cfg = write_cfg(
        d,
        "cmp.cfg",
        &format!("{common}solution = bundle\ntrajectory = oracle/oracle.vbst\npaths = 3\n"),
    );
    assert_eq!(vbsde(&["compare", cfg.to_str().unwrap()], None), 0);
    let s: CompareSummary =
        serde_json::from_slice(&std::fs::read(d.join("cmp.out/compare.json")).unwrap()).unwrap();
    assert_eq!(s.paths, 3);
    assert!(s.max_error > 0.0 && s.max_error < 0.05, "{}", s.max_error);
    assert_eq!(csv_rows(&d.join("cmp.out/compare.csv")).len(), 3 * 9);

    // oracle against itself
    let cfg = write_cfg(
        d,
        "self.cfg",
        &format!(
            "{common}solution = oracle/oracle.vbst\ntrajectory = oracle/oracle.vbst\npaths = 2\n"
        ),
    );
    assert_eq!(vbsde(&["compare", cfg.to_str().unwrap()], None), 0);
    assert!(csv_rows(&d.join("self.out/compare.csv"))
        .iter()
        .all(|r| r[3] == 0.0));

    let cfg = write_cfg(
        d,
        "zero.cfg",
        &format!("{common}solution = bundle\ntrajectory = oracle/oracle.vbst\npaths = 0\n"),
    );
    assert_eq!(vbsde(&["compare", cfg.to_str().unwrap()], None), 2);

    let other = write_cfg(
        d,
        "o2.cfg",
        "psi = sin(1,0)\nn = 8\nnu = 0.3\nhorizon = 0.25\nsteps = 8\noutput_dir = o2\n",
    );
    assert_eq!(vbsde(&["oracle", other.to_str().unwrap()], None), 0);
    let cfg = write_cfg(
        d,
        "mm.cfg",
        &format!("{common}solution = bundle\ntrajectory = o2/oracle.vbst\npaths = 1\n"),
    );
    assert_eq!(vbsde(&["compare", cfg.to_str().unwrap()], None), 2);
    assert!(manifest(&d.join("mm.out"))
        .error
        .unwrap()
        .contains("mismatch"));

    let cfg = write_cfg(
        d,
        "diag.cfg",
        &format!("{common}solution = bundle\npaths = 2\n"),
    );
    assert_eq!(vbsde(&["diagnose", cfg.to_str().unwrap()], None), 0);
    let diag: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("diag.out/diagnostics.json")).unwrap())
            .unwrap();
    assert_eq!(diag["schema_version"], 1);
    assert_eq!(diag["max_principle"]["pass"], true);
    let solve_diag = std::fs::read(d.join("bundle/diagnostics.json")).unwrap();
    assert_eq!(
        std::fs::read(d.join("diag.out/diagnostics.json")).unwrap(),
        solve_diag
    );
    assert!(d.join("diag.out/residuals.csv").exists());
}

#[test]
fn config_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    write_cfg(
        tmp.path(),
        "oracle.cfg",
        "psi = cos(0,1)\nn = 8\nsteps = 2\n",
    );
    assert_eq!(vbsde(&["oracle"], Some(tmp.path())), 0);
    assert!(tmp.path().join("oracle.out/oracle.csv").exists());
    assert_eq!(vbsde(&["oracle", "oracle.cfg"], Some(tmp.path())), 0);
    assert_eq!(vbsde(&["oracle"], None), 2);
}

#[test]
fn solve_outputs_do_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let body =
        "psi = sin(1,0) + 0.5*cos(1,1)\nn = 8\nsteps = 4\ninner_branches = 100\nouter_paths = 2\n";
    let one = write_cfg(tmp.path(), "w1.cfg", &format!("{body}workers = 1\n"));
    let four = write_cfg(tmp.path(), "w4.cfg", &format!("{body}workers = 4\n"));
    assert_eq!(vbsde(&["solve", one.to_str().unwrap()], None), 0);
    assert_eq!(vbsde(&["solve", four.to_str().unwrap()], None), 0);
    let a = manifest(&tmp.path().join("w1.out")).files;
    let b = manifest(&tmp.path().join("w4.out")).files;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}
