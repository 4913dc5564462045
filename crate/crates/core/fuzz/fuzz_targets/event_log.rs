//! Arbitrary event logs are parsed and replayed against the standard
//! catalog. Replay may reject a log but must never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;
use transferlab::catalog::Catalog;
use transferlab::survey::{export_response_rows, parse_event_log, replay};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(events) = parse_event_log(text) else {
        return;
    };
    let catalog = Catalog::standard();
    if let Ok(sessions) = replay(&catalog, &events) {
        let sessions: Vec<_> = sessions.into_values().collect();
        let rows = export_response_rows(&catalog, &sessions);
        assert_eq!(rows.len() % 44, 0);
    }
});
