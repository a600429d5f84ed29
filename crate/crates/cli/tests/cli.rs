use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_disorder-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SCAN: &str = r#"
master_seed = 11

[experiment]
kind = "marginal-scan"
beta_hat_grid = [0.5, 1.5]
N_grid = [64, 256]
samples = 300

[experiment.model]
kind = "pinning"
renewal = { alpha = 0.5, N_max = 256 }
"#;

fn sorted_csv(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[1..].sort();
    lines
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCAN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "8")] {
        let o = run(&["run", "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(sorted_csv(&a.join("marginal_scan.csv")), sorted_csv(&b.join("marginal_scan.csv")));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    for key in ["config", "config_hash", "seed", "version", "started", "elapsed"] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(manifest["seed"], 11);
}

#[test]
fn negative_alpha_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCAN);
    let o = run(&["run", "--config", &cfg, "--set", "experiment.model.renewal.alpha=-1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn malformed_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "master_seed = 1\n[experiment]\nkind = \"no-such-experiment\"\n");
    assert_eq!(run(&["validate", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn resource_errors_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
master_seed = 1
[experiment]
kind = "continuum-chaos"
kernel = { branch = "finite-mean", m = 1.0 }
beta_hat = 1.0
t = 1.0
mesh = 1e-7
k_max = 20
samples = 4
"#,
    );
    let o = run(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn oracle_check_reports_its_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
master_seed = 3
[experiment]
kind = "chaos-oracle-check"
beta = 0.5
h = -0.05
N = 10
environments = 100
model = { kind = "pinning", renewal = { alpha = 0.75, N_max = 32 } }
"#,
    );
    let o = run(&["check", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("PASS: max relative error"), "{stdout}");
    // an unreachable tolerance turns the check red
    let o = run(&["check", "--config", &cfg, "--set", "experiment.tolerance=1e-300", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCAN);
    let out = dir.path().join("first");
    let o = run(&["run", "--config", &cfg, "--format", "json", "--seed", "99", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(out.join("marginal_scan.json").exists());
    let manifest = out.join("manifest.json");
    let o = run(&["replay", "--manifest", manifest.to_str().unwrap(), "--threads", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("replay identical"));
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCAN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["run", "--config", &cfg, "--seed", "1", "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["run", "--config", &cfg, "--seed", "2", "--out", b.to_str().unwrap()]).status.success());
    assert_ne!(sorted_csv(&a.join("marginal_scan.csv")), sorted_csv(&b.join("marginal_scan.csv")));
}
