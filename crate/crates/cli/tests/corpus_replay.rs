//! Replays the checked-in fuzz corpus through every parser entry point so
//! the regular test suite exercises the same surfaces the fuzzers target.

use std::fs;
use std::path::{Path, PathBuf};

use nibb_cli::config::MeasureSource;
use nibb_cli::ExperimentConfig;
use nibb_core::burgers::LimitShape;
use nibb_core::measures::{AtomicMeasure, GridDensity, Measure1D};
use nibb_core::sde::PathEnsemble;

fn corpus_dir(target: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target)
}

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = corpus_dir(target);
    let mut out = Vec::new();
    for entry in fs::read_dir(&dir).unwrap_or_else(|e| panic!("missing corpus {target}: {e}")) {
        let path = entry.unwrap().path();
        out.push((
            path.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&path).unwrap(),
        ));
    }
    assert!(!out.is_empty(), "empty corpus for {target}");
    out.sort();
    out
}

#[test]
fn density_csv_corpus() {
    let mut parsed = 0;
    for (name, bytes) in seeds("density_csv") {
        if let Ok(text) = std::str::from_utf8(&bytes) {
            if GridDensity::from_csv_str(text).is_ok() {
                parsed += 1;
            } else {
                panic!("seed {name} should parse");
            }
        }
    }
    assert!(parsed >= 3);
}

#[test]
fn atoms_csv_corpus() {
    for (name, bytes) in seeds("atoms_csv") {
        let text = std::str::from_utf8(&bytes).unwrap();
        AtomicMeasure::from_csv_str(text).unwrap_or_else(|e| panic!("seed {name}: {e}"));
    }
}

#[test]
fn named_measure_corpus() {
    let mut ok = 0;
    let mut err = 0;
    for (_, bytes) in seeds("named_measure") {
        let text = std::str::from_utf8(&bytes).unwrap();
        match Measure1D::parse_named(text) {
            Ok(_) => ok += 1,
            Err(_) => err += 1,
        }
    }
    assert!(ok >= 3, "valid named measures should parse");
    assert!(err >= 1, "the malformed seed should fail gracefully");
}

#[test]
fn ensemble_bin_corpus() {
    let mut ok = 0;
    let mut err = 0;
    for (_, bytes) in seeds("ensemble_bin") {
        match PathEnsemble::from_bytes(&bytes) {
            Ok(_) => ok += 1,
            Err(_) => err += 1,
        }
    }
    assert!(ok >= 1);
    assert!(err >= 1, "the truncated seed should fail gracefully");
}

#[test]
fn shape_json_corpus() {
    let mut ok = 0;
    for (_, bytes) in seeds("shape_json") {
        let text = std::str::from_utf8(&bytes).unwrap();
        if LimitShape::from_json_str(text).is_ok() {
            ok += 1;
        }
    }
    assert!(ok >= 1);
}

#[test]
fn config_json_corpus() {
    for (name, bytes) in seeds("config_json") {
        let text = std::str::from_utf8(&bytes).unwrap();
        let cfg = ExperimentConfig::from_json_str(text)
            .unwrap_or_else(|e| panic!("seed {name}: {e}"));
        let csv = |m: &Option<MeasureSource>| matches!(m, Some(MeasureSource::Csv { .. }));
        if !csv(&cfg.mu_a) && !csv(&cfg.mu_b) {
            nibb_cli::resolve(&cfg, Path::new(".")).unwrap_or_else(|e| panic!("seed {name}: {e}"));
        }
    }
}
