#![no_main]

use ca_core::accelerator::parse_translations;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_translations(text);
});
