#![no_main]

use std::sync::OnceLock;

use ca_core::boosters::closed_qa_guard;
use ca_core::project::ClosedQAPolicy;
use ca_core::sample;
use libfuzzer_sys::fuzz_target;

static POLICY: OnceLock<ClosedQAPolicy> = OnceLock::new();

fuzz_target!(|text: &str| {
    let policy = POLICY.get_or_init(|| sample::banking().closed_qa);
    let (answer, _) = closed_qa_guard(policy, text);
    assert!(answer == policy.default_answer || policy.answers.contains(&answer));
});
