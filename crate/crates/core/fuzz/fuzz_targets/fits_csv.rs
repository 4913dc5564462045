//! Fit files must parse or fail cleanly; accepted fits can be summarized.

#![no_main]

use libfuzzer_sys::fuzz_target;
use transferlab::estimation::{parse_fits_csv, report_markdown};

fuzz_target!(|data: &[u8]| {
    if let Ok(fits) = parse_fits_csv(data) {
        let _ = report_markdown(&fits);
    }
});
