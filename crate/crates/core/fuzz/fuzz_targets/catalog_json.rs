//! Catalog JSON must parse or fail cleanly; accepted catalogs survive a
//! write and re-read unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;
use transferlab::catalog::{catalog_to_json, parse_catalog_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(questions) = parse_catalog_json(text) {
        let again = parse_catalog_json(&catalog_to_json(&questions).unwrap()).unwrap();
        assert_eq!(again, questions);
    }
});
