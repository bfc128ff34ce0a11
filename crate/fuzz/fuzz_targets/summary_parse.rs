#![no_main]

use ca_core::boosters::parse_summary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_summary(text);
});
