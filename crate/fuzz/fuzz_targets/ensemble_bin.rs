#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Decoder for the compact binary slice format; arbitrary bytes must
    // produce a structured error, never a panic or unbounded allocation.
    let _ = nibb_core::sde::PathEnsemble::from_bytes(data);
});
