#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Must not panic on arbitrary two-column input.
        let _ = nibb_core::measures::GridDensity::from_csv_str(text);
    }
});
