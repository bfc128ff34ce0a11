#![no_main]

use ca_core::accelerator::Staging;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(staging) = Staging::parse(text) {
        let again = Staging::parse(&staging.to_yaml()).expect("serialized staging parses");
        assert_eq!(again.items.len(), staging.items.len());
    }
});
