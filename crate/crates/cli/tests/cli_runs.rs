//! End-to-end command runs: artifact layout, determinism across worker
//! counts, and the error taxonomy.

use std::fs;
use std::path::Path;

use nibb_cli::{run_command, Command, Overrides};
use nibb_core::sde::PathEnsemble;

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("missing artifact {name}: {e}"))
}

#[test]
fn simulate_writes_ensemble_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.json",
        r#"{"preset": "watermelon", "n": 8, "samples": 12, "record_times": [0.25, 0.5], "seed": 5}"#,
    );
    let out = tmp.path().join("out");
    run_command(Command::Simulate, &cfg, &out, &Overrides::default()).unwrap();
    let csv = String::from_utf8(read(&out, "ensemble.csv")).unwrap();
    assert!(csv.starts_with("sample,time,rank,position\n"));
    assert_eq!(csv.lines().count(), 1 + 12 * 2 * 8);
    let ens = PathEnsemble::from_bytes(&read(&out, "ensemble.bin")).unwrap();
    assert_eq!(ens.samples(), 12);
    assert_eq!(ens.times, vec![0.25, 0.5]);
    assert!(out.join("manifest.json").exists());
    assert!(out.join("timings.json").exists());
}

#[test]
fn worker_count_does_not_change_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "edge.json",
        r#"{
            "preset": "watermelon",
            "n": 16,
            "samples": 60,
            "drift_mode": "mean-field",
            "record_times": [0.5],
            "seed": 99,
            "edge": {"time": 0.5, "side": "right"},
            "tw2": {"quad_nodes": 48}
        }"#,
    );
    let out1 = tmp.path().join("w1");
    let out2 = tmp.path().join("w2");
    run_command(
        Command::EdgeStats,
        &cfg,
        &out1,
        &Overrides {
            seed: None,
            workers: Some(1),
        },
    )
    .unwrap();
    run_command(
        Command::EdgeStats,
        &cfg,
        &out2,
        &Overrides {
            seed: None,
            workers: Some(2),
        },
    )
    .unwrap();
    for artifact in [
        "edge_samples.csv",
        "summary.json",
        "cdf_overlay.csv",
        "density_overlay.csv",
    ] {
        let a = read(&out1, artifact);
        let b = read(&out2, artifact);
        assert_eq!(a, b, "artifact {artifact} differs across worker counts");
    }
    // Manifests differ only in the recorded worker count.
    let m1 = String::from_utf8(read(&out1, "manifest.json")).unwrap();
    let m2 = String::from_utf8(read(&out2, "manifest.json")).unwrap();
    assert_eq!(
        m1.replace("\"workers\": 1", "\"workers\": 2"),
        m2
    );
}

#[test]
fn seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.json",
        r#"{"preset": "watermelon", "n": 4, "samples": 6, "record_times": [0.5], "seed": 1}"#,
    );
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    run_command(Command::Simulate, &cfg, &out1, &Overrides::default()).unwrap();
    run_command(
        Command::Simulate,
        &cfg,
        &out2,
        &Overrides {
            seed: Some(77),
            workers: None,
        },
    )
    .unwrap();
    assert_ne!(read(&out1, "ensemble.csv"), read(&out2, "ensemble.csv"));
}

#[test]
fn tw2_command_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tw2.json",
        r#"{"tw2": {"s": -1.0, "quad_nodes": 48, "write_table": true}}"#,
    );
    let out = tmp.path().join("out");
    run_command(Command::Tw2, &cfg, &out, &Overrides::default()).unwrap();
    let table = String::from_utf8(read(&out, "tw2_table.csv")).unwrap();
    let first = table.lines().next().unwrap();
    assert!(first.starts_with("-10,"));
    assert_eq!(table.lines().count(), 801);
}

#[test]
fn validation_failures_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    // samples = 0
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"preset": "watermelon", "n": 4, "samples": 0, "record_times": [0.5]}"#,
    );
    let out = tmp.path().join("out");
    let err = run_command(Command::Simulate, &cfg, &out, &Overrides::default()).unwrap_err();
    assert!(err.is_validation(), "{err}");

    // missing referenced CSV
    let cfg = write_config(
        tmp.path(),
        "missing.json",
        r#"{"mu_a": {"csv": "nope.csv"}, "mu_b": {"named": "point(0)"}}"#,
    );
    let err = run_command(Command::Simulate, &cfg, &out, &Overrides::default()).unwrap_err();
    assert!(err.is_validation(), "{err}");

    // config that does not parse
    let cfg = write_config(tmp.path(), "broken.json", "{");
    let err = run_command(Command::Simulate, &cfg, &out, &Overrides::default()).unwrap_err();
    assert!(err.is_validation(), "{err}");
}

#[test]
fn rigidity_command_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "rig.json",
        r#"{
            "preset": "watermelon",
            "n": 16,
            "samples": 40,
            "drift_mode": "mean-field",
            "record_times": [0.5],
            "rigidity": {"time": 0.5, "z_probes": [[0.0, 1.0], [0.0, 2.0]]}
        }"#,
    );
    let out = tmp.path().join("out");
    run_command(Command::Rigidity, &cfg, &out, &Overrides::default()).unwrap();
    let report: serde_json::Value =
        serde_json::from_slice(&read(&out, "rigidity.json")).unwrap();
    assert_eq!(report["n"], 16);
    let st: serde_json::Value = serde_json::from_slice(&read(&out, "stieltjes.json")).unwrap();
    assert_eq!(st.as_array().unwrap().len(), 2);
    let curve = String::from_utf8(read(&out, "rigidity_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 16);
}

#[test]
fn dominance_command_reports_zero_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "dom.json",
        r#"{
            "preset": "watermelon",
            "n": 8,
            "samples": 200,
            "record_times": [0.5],
            "dominance": {"shift": 0.1, "time": 0.5}
        }"#,
    );
    let out = tmp.path().join("out");
    run_command(Command::Dominance, &cfg, &out, &Overrides::default()).unwrap();
    let report: serde_json::Value =
        serde_json::from_slice(&read(&out, "dominance.json")).unwrap();
    assert_eq!(report["total_violations"], 0);
}

#[test]
fn limitshape_command_writes_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "shape.json",
        r#"{
            "preset": "watermelon",
            "record_times": [0.5],
            "shape": {"times": [0.25, 0.5, 0.75]}
        }"#,
    );
    let out = tmp.path().join("out");
    run_command(Command::LimitShape, &cfg, &out, &Overrides::default()).unwrap();
    let shape = nibb_core::burgers::LimitShape::from_json_str(
        &String::from_utf8(read(&out, "shape.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(shape.times, vec![0.25, 0.5, 0.75]);
    assert!(out.join("shape_densities.csv").exists());
}

#[test]
fn plot_kind_parsing_and_missing_inputs() {
    use nibb_cli::{emit_plotdata, PlotKind, RunOutputs};
    use std::str::FromStr;

    assert!(PlotKind::from_str("density-overlay").is_ok());
    assert!(PlotKind::from_str("cdf-overlay").is_ok());
    assert!(PlotKind::from_str("rigidity-curve").is_ok());
    let err = PlotKind::from_str("violin").unwrap_err();
    assert!(err.is_validation(), "{err}");

    // Missing inputs are usage errors.
    let tmp = tempfile::tempdir().unwrap();
    let empty = RunOutputs::default();
    for kind in [PlotKind::DensityOverlay, PlotKind::CdfOverlay, PlotKind::RigidityCurve] {
        let err = emit_plotdata(&empty, kind, tmp.path()).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }
}

#[test]
fn cdf_overlay_first_column_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "edge.json",
        r#"{
            "preset": "watermelon",
            "n": 8,
            "samples": 30,
            "drift_mode": "mean-field",
            "record_times": [0.5],
            "edge": {"time": 0.5, "side": "right"},
            "tw2": {"quad_nodes": 48}
        }"#,
    );
    let out = tmp.path().join("out");
    run_command(Command::EdgeStats, &cfg, &out, &Overrides::default()).unwrap();
    let text = String::from_utf8(read(&out, "cdf_overlay.csv")).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for line in text.lines().skip(1) {
        let s: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(s > prev);
        prev = s;
    }
}
