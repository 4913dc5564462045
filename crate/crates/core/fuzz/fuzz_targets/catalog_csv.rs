//! Catalog CSV must parse or fail cleanly; accepted catalogs round-trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use transferlab::catalog::{parse_catalog_csv, write_catalog_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(questions) = parse_catalog_csv(data) {
        let mut buf = Vec::new();
        write_catalog_csv(&questions, &mut buf).unwrap();
        assert_eq!(parse_catalog_csv(buf.as_slice()).unwrap(), questions);
    }
});
