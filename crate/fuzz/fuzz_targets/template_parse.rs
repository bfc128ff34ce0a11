#![no_main]

use std::collections::BTreeMap;

use ca_core::template;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(names) = template::placeholders(text) {
        let bindings: BTreeMap<String, String> =
            names.into_iter().map(|n| (n.clone(), n)).collect();
        template::render(text, &bindings).expect("all placeholders bound");
    }
    let escaped = template::escape(text);
    assert_eq!(template::render(&escaped, &BTreeMap::new()).unwrap(), text);
});
