#![no_main]

use std::sync::OnceLock;

use ca_core::nlu::EntityExtractor;
use ca_core::sample;
use libfuzzer_sys::fuzz_target;

static EXTRACTOR: OnceLock<EntityExtractor> = OnceLock::new();

fuzz_target!(|text: &str| {
    let extractor = EXTRACTOR.get_or_init(|| EntityExtractor::new(&sample::banking()));
    let chars: Vec<char> = ca_core::text::nfc(text).chars().collect();
    for m in extractor.extract(text) {
        assert!(m.start <= m.end && m.end <= chars.len());
        assert_eq!(chars[m.start..m.end].iter().collect::<String>(), m.raw);
    }
});
