//! Session exports must parse or fail cleanly; accepted rows round-trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use transferlab::survey::{parse_sessions_csv, write_sessions_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_sessions_csv(data) {
        let mut buf = Vec::new();
        write_sessions_csv(&rows, &mut buf).unwrap();
        assert_eq!(parse_sessions_csv(buf.as_slice()).unwrap(), rows);
    }
});
