//! End-to-end tests of the `quantfp` binary: exit codes, artifact sets,
//! manifest integrity, and byte-identical re-runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_quantfp");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn quantfp")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, body).expect("write config");
    path
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const LINFP_SMALL: &str = r#"
scenario = "linfp"
[grid]
x_min = -6.0
x_max = 6.0
n = 240
[time]
t_end = 0.05
dt = 5e-4
[model]
kind = "brownian"
sigma = 1.0
[initial]
kind = "gaussian"
mean = 0.0
std = 0.5
"#;

const NONLINEAR_SMALL: &str = r#"
scenario = "nonlinear"
[grid]
x_min = -6.0
x_max = 6.0
n = 200
[time]
t_end = 0.1
dt = 1e-3
[model]
kind = "median-attracting-ou"
rate = 1.0
sigma = 1.0
[initial]
kind = "gaussian"
mean = 0.2
std = 0.6
"#;

const STABLE_SMALL: &str = r#"
scenario = "stable"
[grid]
x_min = -64.0
x_max = 64.0
n = 2048
[time]
t_end = 0.1
dt = 2e-3
[model]
kind = "stable-constant"
alpha_s = 1.5
a = 1.0
[initial]
kind = "dirac"
origin = 0.0
"#;

const PARTICLES_SMALL: &str = r#"
scenario = "particles"
[time]
t_end = 0.2
dt = 1e-3
[model]
kind = "median-attracting-ou"
rate = 1.0
sigma = 1.0
[initial]
kind = "point"
origin = 0.3
[particles]
n = 2000
seeds = [3, 4]
snapshot_times = [0.1]
"#;

#[test]
fn linfp_run_emits_artifacts_and_a_valid_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), LINFP_SMALL);
    let out = dir.path().join("artifacts");

    let output = run(&[
        "linfp",
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));

    for file in ["path.csv", "final.csv", "report.json", "timing.json", "manifest.json"] {
        assert!(out.join(file).is_file(), "missing artifact {file}");
    }
    quantfp::io::verify_manifest(&out).expect("manifest re-validates offline");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["frozen_omega"], 0.0);
    let manifest = quantfp::io::read_manifest(&out).unwrap();
    assert_eq!(manifest.config["scenario"], "linfp");
    assert_eq!(manifest.config["quantile"]["alpha"], 0.5, "defaults are echoed");
}

#[test]
fn nonlinear_solve_emits_curve_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NONLINEAR_SMALL);
    let out = dir.path().join("artifacts");

    let output = run(&[
        "nonlinear",
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));

    for file in ["path.csv", "curve.csv", "final.csv", "report.json", "manifest.json"] {
        assert!(out.join(file).is_file(), "missing artifact {file}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let residual = report["trace"]["residual"].as_f64().unwrap();
    assert!(residual < 1e-4, "fixed-point residual too large: {residual}");
    quantfp::io::verify_manifest(&out).unwrap();
}

#[test]
fn stable_solve_from_a_point_mass_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), STABLE_SMALL);
    let out = dir.path().join("artifacts");

    let output = run(&[
        "stable",
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    for file in ["path.csv", "curve.csv", "final.csv", "report.json", "manifest.json"] {
        assert!(out.join(file).is_file(), "missing artifact {file}");
    }
    quantfp::io::verify_manifest(&out).unwrap();
}

#[test]
fn particles_reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), PARTICLES_SMALL);
    let out1 = dir.path().join("first");
    let out2 = dir.path().join("second");

    for out in [&out1, &out2] {
        let output = run(&[
            "particles",
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    }

    // Every non-timing artifact must be byte-for-byte reproducible; the
    // manifest hashes all of them, so comparing it is the strongest check.
    for file in [
        "record_seed3.csv",
        "record_seed4.csv",
        "snapshot_seed3_0.csv",
        "snapshot_seed4_0.csv",
        "report.json",
        "manifest.json",
    ] {
        let a = fs::read(out1.join(file)).unwrap_or_else(|_| panic!("missing {file}"));
        let b = fs::read(out2.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    quantfp::io::verify_manifest(&out1).unwrap();
}

#[test]
fn verify_density_subset_prints_gate_lines_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");

    let output = run(&["verify", "--subset", "density", "--out", out.to_str().unwrap()]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));

    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("[PASS] gate  3"), "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["subset"], "density");
    assert_eq!(report["all_passed"], true);
    quantfp::io::verify_manifest(&out).unwrap();
}

#[test]
fn config_errors_exit_with_code_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = LINFP_SMALL.to_string() + "\n[quantile]\nalpha = 1.2\n";
    let config = write_config(dir.path(), &bad);
    let out = dir.path().join("artifacts");

    let output = run(&[
        "linfp",
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("quantile.alpha"), "stderr: {stderr}");
}

#[test]
fn scenario_mismatch_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), NONLINEAR_SMALL);
    let out = dir.path().join("artifacts");

    let output = run(&[
        "linfp",
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("nonlinear"));
}

#[test]
fn missing_required_flags_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), LINFP_SMALL);

    let no_config = run(&["linfp", "run", "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(no_config.status.code(), Some(2));
    assert!(stderr_of(&no_config).contains("--config"));

    let no_out = run(&["linfp", "run", "--config", config.to_str().unwrap()]);
    assert_eq!(no_out.status.code(), Some(2));
    assert!(stderr_of(&no_out).contains("--out"));
}

#[test]
fn unknown_verify_subset_exits_with_code_2() {
    let output = run(&["verify", "--subset", "bogus"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("verify.subset"));
}

#[test]
fn bundled_example_config_runs_end_to_end() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/linfp_brownian.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("artifacts");

    let output = run(&[
        "linfp",
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    quantfp::io::verify_manifest(&out).unwrap();
}
