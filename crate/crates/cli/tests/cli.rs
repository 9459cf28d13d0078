use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mimo_pilot_cli::{RunSummary, ValidationSummary};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mimo-pilot"))
}

fn write_spec(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("MIMO_PILOT_OUT").output().unwrap()
}

const SMALL: &str = r#"
methods = ["random", "smart"]
n_realizations_outer = 3
seed = 5
random_inner_seeds = 2
[network]
num_cells = 2
users_per_cell = 2
pilot_len = 2
bs_antennas = 50
"#;

#[test]
fn single_random_drop_gives_one_row_per_user() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "s.toml",
        "methods = [\"random\"]\n[network]\nnum_cells = 2\nusers_per_cell = 3\npilot_len = 3\n",
    );
    let out = dir.path().join("out");
    let o = run(&["run", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    let cdf = fs::read_to_string(out.join("cdf_random.csv")).unwrap();
    assert_eq!(cdf.lines().count(), 2);
    let summary: RunSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.points[0].methods[0].samples, 1);
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, threads) in [(&a, "1"), (&b, "4"), (&c, "4")] {
        let o = run(&["run", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["samples.csv", "cdf_random.csv", "cdf_smart.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_changes_drops() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["run", spec.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["run", spec.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "6"]).status.success());
    assert_ne!(fs::read(a.join("samples.csv")).unwrap(), fs::read(b.join("samples.csv")).unwrap());
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("output_dir = {:?}\n{SMALL}", dir.path().join("from_spec").to_str().unwrap());
    let spec = write_spec(dir.path(), "s.toml", &body);
    assert!(run(&["run", spec.to_str().unwrap()]).status.success());
    assert!(dir.path().join("from_spec/samples.csv").exists());

    let env_dir = dir.path().join("from_env");
    let o = bin()
        .args(["run", spec.to_str().unwrap()])
        .env("MIMO_PILOT_OUT", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_dir.join("samples.csv").exists());

    let flag_dir = dir.path().join("from_flag");
    let o = bin()
        .args(["run", spec.to_str().unwrap(), "--out", flag_dir.to_str().unwrap()])
        .env("MIMO_PILOT_OUT", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag_dir.join("samples.csv").exists());
}

#[test]
fn json_spec_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "s.json",
        r#"{"methods": ["smart"], "network": {"num_cells": 2, "users_per_cell": 2, "pilot_len": 2}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["run", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("cdf_smart.csv").exists());
}

#[test]
fn spec_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "bogus = 1",
        "methods = []",
        "[network]\nnum_cells = 0",
        "methods = [\"smart\"]\n[network]\npilot_len = 3",
        "methods = [\"exhaustive_joint\"]\n[network]\nusers_per_cell = 8\npilot_len = 8",
    ] {
        let spec = write_spec(dir.path(), "bad.toml", body);
        let o = run(&["run", spec.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    // validate needs a simulation section
    let spec = write_spec(dir.path(), "nomc.toml", SMALL);
    let o = run(&["validate", spec.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

const VALIDATION: &str = r#"
n_realizations_outer = 2
seed = 3
[network]
num_cells = 2
users_per_cell = 2
pilot_len = 2
[mc]
n_realizations = 20000
antennas = 10
seed = 1
"#;

#[test]
fn validation_passes_on_exact_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "v.toml", VALIDATION);
    let out = dir.path().join("out");
    let o = run(&["validate", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let s: ValidationSummary =
        serde_json::from_str(&fs::read_to_string(out.join("validation_summary.json")).unwrap()).unwrap();
    assert!(s.passed);
    assert_eq!(s.modes.len(), 3);
    assert!(s.modes.iter().all(|m| m.comparisons == 8 && m.sca_runs == 2));
    let csv = fs::read_to_string(out.join("validation.csv")).unwrap();
    assert!(csv.starts_with("mode,param,instance,check,l,k,variant,closed_form,empirical,std_err,z\n"));
}

#[test]
fn corrupted_closed_form_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{VALIDATION}[validation]\nclosed_form_scale = 1.2\nsca_audit = false\nmodes = [{{ kind = \"ideal\" }}]\n");
    let spec = write_spec(dir.path(), "v.toml", &body);
    let out = dir.path().join("out");
    let o = run(&["validate", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let s: ValidationSummary =
        serde_json::from_str(&fs::read_to_string(out.join("validation_summary.json")).unwrap()).unwrap();
    assert!(!s.passed);
}

#[test]
fn epsilon_sweep_gives_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{VALIDATION}[validation]\nmodes = []\nsca_audit = false\n[sweep]\nepsilon = [0.0, 0.05, 0.1, 0.15, 0.2]\n"
    );
    let spec = write_spec(dir.path(), "v.toml", &body);
    let out = dir.path().join("out");
    let o = run(&["validate", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let s: ValidationSummary =
        serde_json::from_str(&fs::read_to_string(out.join("validation_summary.json")).unwrap()).unwrap();
    assert_eq!(s.modes.len(), 5);
    assert!(s.modes.iter().all(|m| m.passed));
}

#[test]
fn antenna_sweep_improves_sca() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "s.toml",
        r#"
        methods = ["sca_joint"]
        n_realizations_outer = 4
        seed = 2
        [network]
        num_cells = 2
        users_per_cell = 2
        pilot_len = 2
        [sweep]
        antennas = [100, 300]
        "#,
    );
    let out = dir.path().join("out");
    let o = run(&["run", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: RunSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let m100 = s.points[0].methods[0].mean_min_se.unwrap();
    let m300 = s.points[1].methods[0].mean_min_se.unwrap();
    assert!(m300 >= m100, "{m100} {m300}");
}
