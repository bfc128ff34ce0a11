#![no_main]

use ca_service::{parse_events, replay};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let events = parse_events(text);
    if let Some(r) = replay(&events) {
        assert_eq!(r.events, events.len());
    }
});
