#![no_main]

use ca_core::llm::parse::{parse_list, parse_numbered_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(items) = parse_numbered_list(text) {
        assert!(!items.is_empty());
    }
    if let Ok(items) = parse_list(text) {
        assert!(items.iter().all(|i| !i.trim().is_empty()));
    }
});
