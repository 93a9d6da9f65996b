use std::fs;
use std::path::Path;
use std::process::Command;

use lqt_cli::{run_finite, run_infinite, run_qlearn, Experiment, ExperimentConfig};

fn lqt(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lqt")).args(args).output().unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn single_step_horizon_writes_two_state_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        horizon: 1,
        out_dir: tmp.path().to_path_buf(),
        ..Default::default()
    };
    let summary = run_finite(&config).unwrap();
    assert_eq!(summary.horizon, 1);
    let text = fs::read_to_string(tmp.path().join("finite/trajectory.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    let cost = fs::read_to_string(tmp.path().join("finite/cost.csv")).unwrap();
    assert_eq!(cost.lines().count(), 2);
}

#[test]
fn short_discount_still_converges_with_larger_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        out_dir: tmp.path().join("a"),
        ..Default::default()
    };
    let short = ExperimentConfig {
        gamma: 0.5,
        out_dir: tmp.path().join("b"),
        ..Default::default()
    };
    let a = run_infinite(&base).unwrap();
    let b = run_infinite(&short).unwrap();
    assert!(b.rollout.steady_state_margin > a.rollout.steady_state_margin);
}

#[test]
fn repeated_seeds_reproduce_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = |dir: &str| ExperimentConfig {
        seed: 3,
        n_samples: 600,
        out_dir: tmp.path().join(dir),
        ..Default::default()
    };
    run_qlearn(&config("a")).unwrap();
    run_qlearn(&config("b")).unwrap();
    let a = csv_files(&tmp.path().join("a/qlearn"));
    assert_eq!(a.len(), 6);
    assert_eq!(a, csv_files(&tmp.path().join("b/qlearn")));
}

#[test]
fn manifest_rerun_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("first");
    let status = lqt(&["infinite", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let manifest = out.join("infinite/manifest.toml");
    let again = tmp.path().join("second");
    let status = lqt(&["infinite", "--config", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(status.status.success());
    assert_eq!(csv_files(&out.join("infinite")), csv_files(&again.join("infinite")));
    let reloaded = ExperimentConfig::load(&manifest).unwrap();
    assert_eq!(reloaded.seed, 9);
}

#[test]
fn invalid_config_exits_with_one_and_names_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "gamma = 2.0\nx0 = [1.0]\n").unwrap();
    let out = lqt(&["finite", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gamma") && err.contains("x0"), "{err}");

    let out = lqt(&["finite", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = lqt(&["finite", "--out", blocker.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    // a ridge-free fit on a constant reference cannot identify the kernel
    let tmp = tempfile::tempdir().unwrap();
    let out = lqt(&["qlearn", "--mu", "0", "--n-samples", "300", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank deficient"));
}

#[test]
fn compare_check_status_follows_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lqt(&["compare", "--check", "--out", tmp.path().to_str().unwrap()]);
    let report = fs::read_to_string(tmp.path().join("compare/report.toml")).unwrap();
    let passed = report.lines().any(|l| l == "passed = true");
    assert_eq!(out.status.code(), Some(if passed { 0 } else { 3 }));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("model-based") && stdout.contains("Q-learning"));
    let costs = fs::read_to_string(tmp.path().join("compare/costs.csv")).unwrap();
    assert!(costs.starts_with("t,model_based,learned\n"));
    assert_eq!(costs.lines().count(), 1001);
    for sub in [Experiment::Infinite, Experiment::Qlearn] {
        assert!(tmp.path().join("compare").join(sub.name()).join("trajectory.csv").exists());
    }

    // without --check the same run succeeds
    let out = lqt(&["compare", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}
