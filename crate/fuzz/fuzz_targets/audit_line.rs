#![no_main]

use ca_core::llm::parse_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_line(text);
});
