use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use choquard_cli::{cmd_check, cmd_evolve, cmd_ground_state, cmd_sweep, sweep_csv_name, CliError};
use choquard_core::dynamics::csv_header;
use choquard_core::ExperimentConfig;

fn repo_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(name)
}

/// Small 2D experiment that runs in a few seconds.
fn small_2d(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset_2d();
    cfg.grid.n = 64;
    cfg.flow.as_mut().unwrap().tol = 1e-7;
    let e = cfg.evolve.as_mut().unwrap();
    e.n = 256;
    e.horizon = 0.1;
    e.callback_stride = 2;
    cfg.sweep.as_mut().unwrap().n_ref = 256;
    cfg.output.directory = out.to_path_buf();
    cfg
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn shipped_configs_match_presets() {
    let a = ExperimentConfig::load(&repo_file("configs/harmonic_2d.toml")).unwrap();
    assert_eq!(a, ExperimentConfig::preset_2d());
    let b = ExperimentConfig::load(&repo_file("configs/physical_3d.toml")).unwrap();
    assert_eq!(b, ExperimentConfig::preset_3d());
}

#[test]
fn check_passes_on_physical_preset() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset_3d();
    cfg.output.directory = dir.path().to_path_buf();
    let rows = cmd_check(&cfg).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.passed), "{rows:?}");
    assert!(dir.path().join("check.json").exists());
}

#[test]
fn check_flags_a_bad_power() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset_3d();
    cfg.model.p = 3.0;
    cfg.output.directory = dir.path().to_path_buf();
    match cmd_check(&cfg) {
        Err(CliError::CheckFailed { failed: 1, .. }) => {}
        other => panic!("expected one failed row, got {other:?}"),
    }
}

#[test]
fn ground_state_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let gs = cmd_ground_state(&small_2d(dir.path())).unwrap();
    assert!(gs.j_value < 0.0);
    let profile = choquard_core::field::snapshot::load(&dir.path().join("profile.chqf")).unwrap();
    assert_eq!(profile, gs.u);
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ground_state.json")).unwrap()).unwrap();
    assert_eq!(record["omega"].as_f64().unwrap(), gs.omega);
    assert_eq!(record["n"], 64);
    let echoed = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed, small_2d(dir.path()));
}

#[test]
fn evolve_with_zero_horizon_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_2d(dir.path());
    cfg.evolve.as_mut().unwrap().horizon = 0.0;
    let samples = cmd_evolve(&cfg).unwrap();
    assert_eq!(samples.len(), 1);
    let mut r = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, csv_header(2));
    assert_eq!(r.records().count(), 1);
}

#[test]
fn single_eps_sweep_equals_evolve() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_evolve(&small_2d(a.path())).unwrap();
    let mut cfg = small_2d(b.path());
    cfg.sweep.as_mut().unwrap().eps = vec![0.5];
    let report = cmd_sweep(&cfg).unwrap();
    assert_eq!(report.members.len(), 1);
    assert_eq!(report.members[0].points, 256);
    let evolved = fs::read(a.path().join("trajectory.csv")).unwrap();
    let swept = fs::read(b.path().join(sweep_csv_name(0.5))).unwrap();
    assert!(evolved == swept, "single-member sweep differs from evolve");
    assert!(fs::read_to_string(b.path().join("sweep.toml")).unwrap().contains("sup_h"));
}

#[test]
fn evolve_is_bitwise_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small_2d(a.path());
    ca.flow.as_mut().unwrap().seed_noise = 0.05;
    let mut cb = ca.clone();
    cb.output.directory = b.path().to_path_buf();
    in_pool(1, || cmd_evolve(&ca)).unwrap();
    in_pool(3, || cmd_evolve(&cb)).unwrap();
    let read = |d: &Path| fs::read(d.join("trajectory.csv")).unwrap();
    assert!(read(a.path()) == read(b.path()));
}

#[test]
fn oversized_grid_aborts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset_3d();
    cfg.grid.n = 512;
    cfg.output.directory = dir.path().to_path_buf();
    let err = cmd_ground_state(&cfg).unwrap_err();
    assert_eq!(err.kind(), "resource_limit");
    assert!(!dir.path().join("profile.chqf").exists());
}

#[test]
fn missing_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset_3d();
    cfg.output.directory = dir.path().to_path_buf();
    let err = cmd_evolve(&cfg).unwrap_err();
    assert_eq!((err.kind(), err.exit_code()), ("config", 2));
    assert!(err.to_string().contains("[evolve]"));
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_choquard")).args(args).env("CHOQUARD_LOG", "off").output().unwrap()
}

#[test]
fn binary_reports_malformed_config_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = fs::read_to_string(repo_file("configs/harmonic_2d.toml")).unwrap().replace("nu = 10.0", "nu = \"ten\"");
    fs::write(&path, text).unwrap();
    let out = binary(&["ground-state", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["status"], "error");
    assert_eq!(record["command"], "ground-state");
    assert_eq!(record["kind"], "config");
    assert!(record["message"].as_str().unwrap().contains("flow.nu"), "{record}");
}

#[test]
fn binary_check_succeeds_and_honours_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let config = repo_file("configs/physical_3d.toml");
    let out = binary(&[
        "check",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "7",
        "--threads",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().filter(|l| l.contains("  pass  ")).count(), 5, "{table}");
    let echoed = ExperimentConfig::load(&out_dir.join("config.toml")).unwrap();
    assert_eq!(echoed.seed, 7);
}
