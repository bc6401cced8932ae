//! End-to-end tests of the `crater-loc` binary: exit codes, determinism of
//! the on-disk outputs, and a frozen SVG fixture for the plot command.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

fn crater_loc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crater-loc"))
        .args(args)
        .current_dir(repo_root())
        .output()
        .expect("binary runs")
}

fn run_seed(seed: &str, out_dir: &Path) -> PathBuf {
    let out = crater_loc(&[
        "run",
        "--config",
        "configs/traj2.json",
        "--seed",
        seed,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out_dir.join(format!("traj2_analog-run-seed{seed}"))
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_seed("7", &tmp.path().join("a"));
    let b = run_seed("7", &tmp.path().join("b"));
    let bytes_a = std::fs::read(a.join("metrics.csv")).unwrap();
    let bytes_b = std::fs::read(b.join("metrics.csv")).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_seed("7", &tmp.path().join("a"));
    let b = run_seed("8", &tmp.path().join("b"));
    assert_ne!(
        std::fs::read(a.join("metrics.csv")).unwrap(),
        std::fs::read(b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn missing_config_exits_2() {
    let out = crater_loc(&["run", "--config", "configs/nope.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_map_exits_2() {
    let out = crater_loc(&[
        "run",
        "--config",
        "configs/traj2.json",
        "--map-path",
        "/nonexistent/map.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_filter_config_exits_2() {
    let out = crater_loc(&[
        "run",
        "--config",
        "configs/traj2.json",
        "--filter.n-eff-threshold",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plot_of_missing_file_exits_2() {
    let out = crater_loc(&["plot", "/nonexistent/metrics.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn batch_reports_summary_and_exits_0() {
    let tmp = tempfile::tempdir().unwrap();
    let out = crater_loc(&[
        "batch",
        "--config",
        "configs/traj2.json",
        "--seeds",
        "3",
        "--output-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("final gt_error"), "stdout: {stdout}");
    let dir = tmp.path().join("traj2_analog-batch-seed0-n3");
    assert!(dir.join("summary.csv").exists());
    assert!(dir.join("final_error_hist.svg").exists());
}

#[test]
fn plot_output_matches_frozen_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = run_seed("1", tmp.path());
    let out = crater_loc(&["plot", run_dir.join("metrics.csv").to_str().unwrap()]);
    assert!(
        out.status.success(),
        "plot failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let svg = std::fs::read(run_dir.join("metrics.svg")).unwrap();
    let fixture_path = repo_root().join("crates/crater-loc/tests/fixtures/run_seed1_metrics.svg");
    let fixture = std::fs::read(&fixture_path)
        .unwrap_or_else(|e| panic!("missing fixture {}: {e}", fixture_path.display()));
    assert_eq!(svg, fixture, "plot output drifted from frozen fixture");
}
