//! Population specs must parse or fail cleanly; accepted specs validate
//! and can be sampled when small.

#![no_main]

use libfuzzer_sys::fuzz_target;
use transferlab::simulator::{parse_population_spec, sample_population};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse_population_spec(text) {
        if spec.size() <= 64 {
            let _ = sample_population(&spec);
        }
    }
});
