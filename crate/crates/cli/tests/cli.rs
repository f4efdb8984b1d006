//! End-to-end tests of the `geoflow` binary: exit codes, determinism,
//! config-file precedence, and output shape.

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // Unsorted axes.
    let out = run(
        dir.path(),
        &["simulate", "--alphas", "3,1,0.3,4", "--random"],
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("nondecreasing"), "{msg}");
    // Wrong symmetry for the actions sweep.
    let out = run(
        dir.path(),
        &["actions", "--alphas", "0.333333,1,3,4", "--grid", "0:1:3,0:1:3"],
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // Loop radius far beyond the energy-momentum image.
    let out = run(
        dir.path(),
        &["monodromy", "--loop", "2.5,0.5,64"],
    );
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn simulate_deterministic_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--alphas",
        "0.333333,1,3,4",
        "--random",
        "--seed",
        "7",
        "--t-end",
        "2",
        "--dt",
        "0.001",
        "--stride",
        "50",
        "--output",
        "a.csv",
    ];
    assert!(run(dir.path(), &args).status.success());
    let first = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert!(run(dir.path(), &args).status.success());
    let second = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(first, second, "identical config + seed must be byte-identical");
    // '\n' endings, '.' decimals, header + rows.
    let text = String::from_utf8(first).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.starts_with("t,x0,"));
    // Sidecar echoes the resolved config including defaults.
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.config.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["seed"], 7);
    assert_eq!(sidecar["dt"], 1e-3);
    assert_eq!(sidecar["h"], 0.5, "default h echoed");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.conf"),
        "alphas = 1,2,2,4\nh = 0.5\nloop = 0.5,0.5,64\noutput = from_file.json\n",
    )
    .unwrap();
    // Flag overrides the config file's output path.
    let out = run(
        dir.path(),
        &["monodromy", "--config", "run.conf", "--output", "override.json"],
    );
    assert!(out.status.success(), "{out:?}");
    assert!(dir.path().join("override.json").exists());
    assert!(!dir.path().join("from_file.json").exists());
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("override.json")).unwrap())
            .unwrap();
    assert_eq!(
        body["m"]["entries"],
        serde_json::json!([[1, 0, 0], [2, 1, 0], [-2, 0, 1]])
    );
    assert_eq!(
        body["n"]["entries"],
        serde_json::json!([[1, 0, 0], [0, 1, 0], [2, 0, 1]])
    );
}

#[test]
fn actions_grid_marks_outside_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "actions",
            "--grid",
            "-1.6:1.6:5,-0.9:1.9:5",
            "--output",
            "act.csv",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(dir.path().join("act.csv")).unwrap();
    assert!(text.lines().any(|l| l.contains(",outside_image,")));
    assert!(text.lines().any(|l| l.contains(",ok,")));
    // Grid rows in deterministic order: one line per cell plus header.
    assert_eq!(text.lines().count(), 26);
}

#[test]
fn revolution_closed_form_matches_quadrature_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "revolution",
            "--alpha0",
            "1",
            "--alpha1",
            "2",
            "--h",
            "1",
            "--case",
            "both",
            "--n",
            "21",
            "--output",
            "rev.csv",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(dir.path().join("rev.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let closed: f64 = f[4].parse().unwrap();
        let quad: f64 = f[5].parse().unwrap();
        assert!((closed - quad).abs() <= 1e-9, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 42, "21 points for each of the two cases");
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["selftest", "--output", "report.json"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.matches("[PASS]").count(), 9, "{stdout}");
    assert!(!stdout.contains("[FAIL]"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report.as_array().unwrap().len(), 9);
}
