//! End-to-end tests of the command-line binary: exit codes, file output,
//! preset listing, and external-grid analysis diagnostics.

use std::path::Path;
use std::process::Command;

fn biphoton() -> Command {
    Command::new(env!("CARGO_BIN_EXE_biphoton"))
}

fn small_config(dir: &Path, rho: f64) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    let text = format!(
        r#"
[state]
sigma_s = 10.56
sigma_i = 9.69
rho = {rho}
center_s = 2586.9
center_i = 2276.9
chirp_s = 0.0
chirp_i = 0.0

[gate]
tau_g = 0.120

[instrument]
res_lambda_s = 0.081
res_lambda_i = 0.135

[grid]
half_span_sigmas = 4.0
n = 48

[run]
name = "small"
total_counts = 2e5
mc_trials = 50
seed = 7
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn presets_lists_bundled_scenarios() {
    let out = biphoton().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["table1", "fig4a", "fig4b", "fig4c", "fig4d"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), -0.9951);
    let out_dir = dir.path().join("out");
    let out = biphoton()
        .args(["all", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("report.txt").exists());
    assert!(out_dir.join("counts_joint_spectrum.csv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["provenance"]["master_seed"], 7);
    assert!(report["witnesses"].as_array().unwrap().len() >= 4);
}

#[test]
fn separable_state_is_inconclusive_exit_two() {
    // a separable state sits on the uncertainty bound, so the witness
    // verdict is inconclusive and the exit code distinguishes it
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 0.0);
    let out = biphoton()
        .args(["witness", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "expected inconclusive exit");
}

#[test]
fn empty_config_lists_required_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.toml");
    std::fs::write(&config, "").unwrap();
    let out = biphoton()
        .args(["all", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("[state]"), "stderr: {stderr}");
    assert!(stderr.contains("total_counts"), "stderr: {stderr}");
}

#[test]
fn unknown_preset_fails() {
    let out = biphoton()
        .args(["simulate", "--scenario", "nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), -0.9951);
    let run = |seed: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = biphoton()
            .args(["simulate", "--config"])
            .arg(&config)
            .args(["--seed", seed])
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(out_dir.join("counts_joint_spectrum.csv")).unwrap()
    };
    let a = run("11", "a");
    let b = run("11", "b");
    let c = run("12", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn external_analysis_flags_resolution_limited_grids() {
    use biphoton::grid::Grid2D;
    use biphoton::model::BiphotonState;
    use biphoton::report::write_count_grid_csv;
    use biphoton::simulate::{draw_counts, joint_spectral_intensity};

    // a spectral grid far narrower than the configured monochromator
    // response cannot be deconvolved
    let narrow = BiphotonState::new(0.05, 0.05, 0.0, 2586.9, 2276.9, 0.0, 0.0).unwrap();
    let grid = Grid2D::spectral(&narrow, 4.0, 48).unwrap();
    let intensity = joint_spectral_intensity(&narrow, &grid).unwrap();
    let counts = draw_counts(&intensity, 2e5, 3).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("counts_joint_spectrum.csv");
    write_count_grid_csv(&csv, &counts, "joint_spectrum", 3, "test").unwrap();

    let config = small_config(dir.path(), -0.9951);
    let out = biphoton()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--counts")
        .arg(&csv)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("resolution-limited"), "stderr: {stderr}");
}

#[test]
fn external_analysis_of_simulated_grids_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), -0.9951);
    let sim_dir = dir.path().join("sim");
    let status = biphoton()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&sim_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let mut cmd = biphoton();
    cmd.args(["analyze", "--config"]).arg(&config);
    cmd.arg("--counts");
    for label in [
        "joint_spectrum",
        "joint_temporal",
        "signal_time_idler_frequency",
        "signal_frequency_idler_time",
    ] {
        cmd.arg(sim_dir.join(format!("counts_{label}.csv")));
    }
    let out = cmd.arg("--out").arg(dir.path().join("ext")).output().unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("ext/report.json").exists());
}
