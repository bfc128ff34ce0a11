#![no_main]

use std::sync::OnceLock;

use ca_core::nlu::{self, IntentModel};
use ca_core::sample;
use libfuzzer_sys::fuzz_target;

static MODEL: OnceLock<IntentModel> = OnceLock::new();

fuzz_target!(|text: &str| {
    let model = MODEL.get_or_init(|| nlu::train(&sample::banking()).expect("sample trains"));
    if let Ok(p) = model.classify(text) {
        assert!((0.0..=1.0 + 1e-9).contains(&p.confidence));
        assert!(p.ranked.windows(2).all(|w| w[0].score >= w[1].score));
    }
});
