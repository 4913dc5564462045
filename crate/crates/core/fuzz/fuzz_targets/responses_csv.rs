//! Response exports must parse or fail cleanly; accepted rows round-trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use transferlab::survey::{parse_responses_csv, write_responses_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_responses_csv(data) {
        let mut buf = Vec::new();
        write_responses_csv(&rows, &mut buf).unwrap();
        assert_eq!(parse_responses_csv(buf.as_slice()).unwrap(), rows);
    }
});
