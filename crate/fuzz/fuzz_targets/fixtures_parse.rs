#![no_main]

use ca_core::llm::MockProvider;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = MockProvider::parse_fixtures(text);
});
