#![no_main]
use libfuzzer_sys::fuzz_target;
use nibb_cli::config::MeasureSource;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = nibb_cli::ExperimentConfig::from_json_str(text) {
            // Resolution must be panic-free; skip file-backed sources so the
            // fuzzer never touches the filesystem.
            let csv = |m: &Option<MeasureSource>| matches!(m, Some(MeasureSource::Csv { .. }));
            if !csv(&cfg.mu_a) && !csv(&cfg.mu_b) {
                let _ = nibb_cli::resolve(&cfg, Path::new("."));
            }
        }
    }
});
