#![no_main]

use ca_core::project::{parse_project, FILES};
use ca_core::sample;
use libfuzzer_sys::fuzz_target;

// First byte picks which file of the sample project is replaced.
fuzz_target!(|data: &[u8]| {
    let Some((&pick, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let name = FILES[pick as usize % FILES.len()];
    let _ = parse_project(&sample::banking_sources().with(name, text));
});
