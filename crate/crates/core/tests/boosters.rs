use std::sync::Arc;

use ca_core::boosters::{BoosterError, Boosters, GuardOutcome};
use ca_core::engine::gateway_with;
use ca_core::llm::{AuditLog, FnProvider, LlmError};
use ca_core::sample;

#[tokio::test]
async fn closed_qa_replays_the_five_questions() {
    let cfg = sample::banking();
    let gw = sample::banking_gateway(&cfg, Arc::new(AuditLog::in_memory()));
    let boosters = Boosters::new(&gw, &cfg);
    for (question, expected) in sample::CLOSED_QA_CASES {
        let (answer, act) = boosters.closed_qa(question, &[]).await;
        assert_eq!(answer, expected, "{question}");
        assert!(act.error.is_none());
    }
}

#[tokio::test]
async fn summary_of_the_card_conversation() {
    let cfg = sample::banking();
    let audit = Arc::new(AuditLog::in_memory());
    let gw = sample::banking_gateway(&cfg, audit.clone());
    let transcript = sample::handoff_transcript(sample::HANDOFF_TRANSCRIPT.len());
    let (summary, act) = Boosters::new(&gw, &cfg).summarize(&transcript).await;
    let summary = summary.unwrap();
    assert!(summary
        .action_required
        .contains("Update the user's address"));
    assert!(summary
        .summary
        .contains("1 Main Street, Capital City, Countryland, AA1 XZY"));
    assert_eq!(act.exchange_ids.len(), 1);
    assert_eq!(audit.len(), 1);
}

#[tokio::test]
async fn label_free_summary_fails_after_one_retry() {
    let cfg = sample::banking();
    let audit = Arc::new(AuditLog::in_memory());
    let gw = sample::banking_gateway(&cfg, audit.clone());
    let (summary, act) = Boosters::new(&gw, &cfg)
        .summarize(&sample::handoff_transcript(10))
        .await;
    assert!(matches!(summary, Err(BoosterError::FormatParse { .. })));
    assert_eq!(act.exchange_ids.len(), 2);
    let templates: Vec<String> = audit.entries().into_iter().map(|e| e.template_id).collect();
    assert_eq!(templates, ["summarize", "summarize_strict"]);
    assert_eq!(act.guard_outcome, GuardOutcome::Rejected);
}

#[tokio::test]
async fn summary_needs_a_user_turn() {
    let cfg = sample::banking();
    let gw = sample::banking_gateway(&cfg, Arc::new(AuditLog::in_memory()));
    let (summary, _) = Boosters::new(&gw, &cfg)
        .summarize(&sample::handoff_transcript(1))
        .await;
    assert_eq!(summary, Err(BoosterError::EmptyTranscript));
}

#[tokio::test]
async fn provider_errors_fall_back_safely() {
    let cfg = sample::banking();
    let provider = FnProvider::new("down", |_| Err(LlmError::ProviderTimeout));
    let gw = gateway_with(&cfg, Arc::new(provider), Arc::new(AuditLog::in_memory()));
    let b = Boosters::new(&gw, &cfg);

    let (answer, act) = b.closed_qa("I want to quit", &[]).await;
    assert_eq!(answer, cfg.closed_qa.default_answer);
    assert_eq!(act.guard_outcome, GuardOutcome::SubstitutedDefault);

    assert!(b
        .answer_out_of_scope("Where is Germany?", &[])
        .await
        .is_err());
    let (text, act) = b
        .rephrase("Send 400 USD.", "more formally", &["400 USD".into()], &[])
        .await;
    assert_eq!(
        (text.as_str(), act.guard_outcome),
        ("Send 400 USD.", GuardOutcome::Rejected)
    );
    let (fixed, _) = b.autocorrect("wunt", &[]).await;
    assert_eq!(fixed, None);
}

#[tokio::test]
async fn financial_advice_refusal_maps_to_default() {
    let cfg = sample::banking();
    let provider = FnProvider::new("refuser", |_| Ok("Please call 001 23 45 89 01.".into()));
    let gw = gateway_with(&cfg, Arc::new(provider), Arc::new(AuditLog::in_memory()));
    let (answer, act) = Boosters::new(&gw, &cfg)
        .answer_out_of_scope("Should I buy shares?", &[])
        .await
        .unwrap();
    assert_eq!(answer, cfg.closed_qa.default_answer);
    assert_eq!(act.guard_outcome, GuardOutcome::SubstitutedDefault);
}

#[tokio::test]
async fn disambiguation_must_name_both_options() {
    let cfg = sample::banking();
    let provider = FnProvider::new("vague", |_| Ok("Could you clarify?".into()));
    let gw = gateway_with(&cfg, Arc::new(provider), Arc::new(AuditLog::in_memory()));
    let (q, act) = Boosters::new(&gw, &cfg)
        .disambiguate("close it", "cancel_account", "pay_bill", &[])
        .await;
    assert_eq!(q, None);
    assert_eq!(act.guard_outcome, GuardOutcome::Rejected);
}
