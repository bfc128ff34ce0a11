//! The bundled private-banking sample project and its mock fixtures.

use std::path::Path;

use crate::llm::{Fixture, MockProvider};
use crate::project::{
    parse_project, write_atomic_files, ProjectConfig, ProjectError, ProjectSources,
};

macro_rules! asset {
    ($name:literal) => {
        ($name, include_str!(concat!("../assets/banking/", $name)))
    };
}

/// Project files of the banking sample, manifest first.
pub const BANKING_FILES: [(&str, &str); 8] = [
    asset!("manifest.yaml"),
    asset!("intents.yaml"),
    asset!("entities.yaml"),
    asset!("forms.yaml"),
    asset!("templates.yaml"),
    asset!("persona.yaml"),
    asset!("closed_qa.yaml"),
    asset!("prompts.yaml"),
];

/// Mock provider fixtures reproducing the sample transcripts.
pub const BANKING_FIXTURES: &str = include_str!("../assets/banking/fixtures.yaml");
pub const FIXTURES_FILE: &str = "fixtures.yaml";

pub fn banking_sources() -> ProjectSources {
    BANKING_FILES
        .iter()
        .fold(ProjectSources::default(), |s, (name, text)| {
            s.with(name, *text)
        })
}

/// The parsed and validated sample project.
pub fn banking() -> ProjectConfig {
    parse_project(&banking_sources()).expect("bundled banking project is valid")
}

pub fn banking_fixtures() -> Vec<Fixture> {
    MockProvider::parse_fixtures(BANKING_FIXTURES).expect("bundled fixtures parse")
}

/// Writes the sample project and its fixtures into `dir`.
pub fn write_banking(dir: &Path) -> Result<(), ProjectError> {
    let files = BANKING_FILES
        .iter()
        .copied()
        .chain([(FIXTURES_FILE, BANKING_FIXTURES)]);
    write_atomic_files(dir, files)
}

/// The context-switching conversation: transfer, address digression, resume,
/// a general-knowledge question and the final confirmation.
pub const CONTEXT_SWITCH_SCRIPT: [&str; 6] = [
    "Hi, I would like to transfer money. My bank account is 334402.",
    "BTW, I also need to change my address: It\u{2019}s Park Avenue 14.",
    "I live in 10012 New York.",
    "I want to transfer 400 Dollars to account number 831123",
    "Where is Germany?",
    "Yes",
];

/// Questions put to the closed-QA booster, with the answer each should get.
pub const CLOSED_QA_CASES: [(&str, &str); 5] = [
    (
        "I have a new address",
        "To change your address you need to sent a mail to info.company.com including your new and old complete address.",
    ),
    (
        "How can I get an account with your company?",
        "If you want to open a bank account, provide a copy of your password and a list of current bank accounts.",
    ),
    ("I want to quit", "If you want to close an account call 001 23 45 89 28"),
    (
        "I forgot my pwd",
        "To change your password sent a mail to info.company.com with that request.",
    ),
    (
        "What are the interest rates I need to pay for a mortgage?",
        "Please call 001 23 45 89 01",
    ),
];

/// Misspelled utterance and its correction.
pub const TYPO_UTTERANCE: &str = "wunt to cancal this accunt";
pub const TYPO_CORRECTION: &str = "I want to cancel this account";
/// Misspelled utterance whose fixture correction is garbage.
pub const TYPO_GARBAGE_UTTERANCE: &str = "wunt to cancal ths accunt";

/// Utterance scoring in the disambiguation band for cancel_account and pay_bill.
pub const AMBIGUOUS_UTTERANCE: &str = "I want to close the bill please";

/// Debit card conversation handed over to a human agent. `true` marks user turns.
pub const HANDOFF_TRANSCRIPT: [(bool, &str); 12] = [
    (false, "Hi, how can I help?"),
    (true, "I need to get a new debit card"),
    (false, "I can help you order a new debit card. Is this a new card or a replacement?"),
    (true, "Replacement"),
    (false, "Is your current card lost, damaged or stolen?"),
    (true, "Damaged"),
    (false, "Please go to www.cardreplace.com to request your new card. Did I help you today?"),
    (
        true,
        "The trouble is the address you have for me is out of date, so before you post it you need to update my address",
    ),
    (false, "I\u{2019}m worry I didn\u{2019}t understand that. Did I help you today?"),
    (true, "I need to update my address"),
    (
        false,
        "My colleague can help you this query, I\u{2019}m connecting you now. Feel free to add any information that might be help now.",
    ),
    (true, "My new address is 1 Main Street, Capital City, Countryland, AA1 XZY."),
];

/// Transcript records for `HANDOFF_TRANSCRIPT`, optionally cut to its first
/// `len` turns.
pub fn handoff_transcript(len: usize) -> Vec<crate::dialog::TurnRecord> {
    use crate::dialog::TurnRecord;
    HANDOFF_TRANSCRIPT
        .iter()
        .take(len)
        .map(|(user, text)| {
            if *user {
                TurnRecord::user(*text)
            } else {
                TurnRecord::bot(*text)
            }
        })
        .collect()
}

/// Generation requests covered by the bundled fixtures.
pub const GEN_DOMAIN: &str = "banking";
pub const GEN_ENTITY_DOMAIN: &str = "finance";
pub const GEN_UTTERANCE_CONSTRAINTS: &str =
    "which is for customers who want to close their account with ABC Bank. Sometimes mention the bank name, sometimes don\u{2019}t.";
pub const GEN_SYNONYM_TERM: &str = "insolvent";
pub const LOCALIZE_KEYS: [&str; 3] = ["product_unavailable", "reconsider_cancel", "agent_handoff"];
pub const LOCALIZE_LOCALES: [&str; 4] = ["de", "de-CH-x-dialect", "es", "fr"];

/// Gateway answering from the bundled fixtures in strict mode.
pub fn banking_gateway(
    config: &ProjectConfig,
    audit: std::sync::Arc<crate::llm::AuditLog>,
) -> crate::llm::Gateway {
    let provider = MockProvider::new(banking_fixtures(), crate::llm::MockMode::Strict);
    crate::engine::gateway_with(config, std::sync::Arc::new(provider), audit)
}
