use std::sync::Arc;

use ca_core::boosters::{BoosterKind, GuardOutcome};
use ca_core::dialog::Action;
use ca_core::engine::{Engine, TurnOutcome};
use ca_core::llm::AuditLog;
use ca_core::project::ProjectConfig;
use ca_core::sample;

fn engine_for(config: ProjectConfig) -> Engine {
    let gateway = sample::banking_gateway(&config, Arc::new(AuditLog::in_memory()));
    Engine::new(Arc::new(config), Arc::new(gateway)).expect("engine")
}

fn engine() -> Engine {
    engine_for(sample::banking())
}

fn filled(turn: &TurnOutcome, frame: usize, slot: &str) -> Option<String> {
    turn.debug
        .frames
        .get(frame)
        .and_then(|f| f.filled.get(slot).cloned())
}

#[tokio::test]
async fn context_switch_script() {
    let e = engine();
    let mut s = e.start_session();
    let script = sample::CONTEXT_SWITCH_SCRIPT;

    let t1 = e.turn(&mut s, script[0]).await.unwrap();
    assert_eq!(t1.debug.frames.len(), 1);
    assert_eq!(t1.debug.frames[0].form, "transfer");
    assert_eq!(filled(&t1, 0, "source_account").as_deref(), Some("334402"));
    assert!(t1.replies[0].contains("recipient's bank account number"));

    let t2 = e.turn(&mut s, script[1]).await.unwrap();
    let forms: Vec<&str> = t2.debug.frames.iter().map(|f| f.form.as_str()).collect();
    assert_eq!(forms, ["transfer", "address"]);
    assert_eq!(filled(&t2, 1, "street").as_deref(), Some("Park Avenue 14"));

    let t3 = e.turn(&mut s, script[2]).await.unwrap();
    assert_eq!(t3.debug.frames.len(), 1);
    assert!(t3.debug.actions.contains(&Action::ResumeFrame {
        form: "transfer".into()
    }));
    let done = &t3.debug.awaiting_confirmation[0];
    assert_eq!(done.form, "address");
    assert_eq!(done.filled["postal_code"], "10012");
    assert_eq!(done.filled["city"], "New York");
    assert_eq!(
        t3.replies[0],
        "Now, let's get back to the money transfer request."
    );

    let t4 = e.turn(&mut s, script[3]).await.unwrap();
    assert!(t4.debug.frames.is_empty());
    let transfer = &t4.debug.awaiting_confirmation[0];
    assert_eq!(transfer.filled["amount"], "400 USD");
    assert_eq!(transfer.filled["dest_account"], "831123");
    let prompt = t4.replies.last().unwrap();
    for v in [
        "334402",
        "831123",
        "400 USD",
        "Park Avenue 14",
        "10012",
        "New York",
    ] {
        assert!(prompt.contains(v), "{v} missing from {prompt}");
    }
    assert!(prompt.starts_with("Before we proceed with the money transfer and address change"));

    let t5 = e.turn(&mut s, script[4]).await.unwrap();
    assert!(t5.replies[0].starts_with("Germany is a country located in Central Europe"));
    assert_eq!(t5.replies[1], *prompt);
    assert_eq!(t5.debug.fallback_count, 0);
    assert!(t5
        .debug
        .boosters
        .iter()
        .any(|b| b.kind == BoosterKind::OutOfScope));

    let t6 = e.turn(&mut s, script[5]).await.unwrap();
    assert!(t6.debug.awaiting_confirmation.is_empty());
    assert_eq!(t6.replies.len(), 2);
    assert!(t6.replies[0].contains("400 USD"));
    assert!(t6.replies[1].contains("Park Avenue 14"));

    assert_eq!(s.transcript.len(), 6 + 9);
}

#[tokio::test]
async fn script_is_deterministic() {
    let e = engine();
    let run = || async {
        let mut s = e.start_session();
        let mut out = Vec::new();
        for line in sample::CONTEXT_SWITCH_SCRIPT {
            out.push(e.turn(&mut s, line).await.unwrap().replies);
        }
        out
    };
    assert_eq!(run().await, run().await);
}

#[tokio::test]
async fn autocorrect_improves_classification() {
    let e = engine();
    let original = e.model().classify(sample::TYPO_UTTERANCE).unwrap();
    assert!(original.confidence < e.config().thresholds.tau_intent);
    let mut s = e.start_session();
    let t = e.turn(&mut s, sample::TYPO_UTTERANCE).await.unwrap();
    let act = &t.debug.boosters[0];
    assert_eq!(
        (act.kind, act.guard_outcome),
        (BoosterKind::Autocorrect, GuardOutcome::Passed)
    );
    assert_eq!(act.output, sample::TYPO_CORRECTION);
    assert_eq!(t.debug.prediction.intent.as_deref(), Some("cancel_account"));
    assert!(t.debug.prediction.confidence > original.confidence);
    assert_eq!(
        t.replies,
        ["I implore you to reconsider cancelling your account."]
    );
}

#[tokio::test]
async fn garbage_correction_keeps_original() {
    let e = engine();
    let original = e.model().classify(sample::TYPO_GARBAGE_UTTERANCE).unwrap();
    let mut s = e.start_session();
    let t = e
        .turn(&mut s, sample::TYPO_GARBAGE_UTTERANCE)
        .await
        .unwrap();
    assert_eq!(t.debug.boosters[0].guard_outcome, GuardOutcome::Rejected);
    assert_eq!(t.debug.prediction, original);
}

#[tokio::test]
async fn ambiguous_request_asks_and_resolves() {
    let e = engine();
    let mut s = e.start_session();
    let t = e.turn(&mut s, sample::AMBIGUOUS_UTTERANCE).await.unwrap();
    let q = &t.replies[0];
    assert!(
        q.contains("close an account") && q.contains("pay a bill"),
        "{q}"
    );
    assert_eq!(
        s.pending_disambiguation.as_deref(),
        Some(&["cancel_account".to_string(), "pay_bill".to_string()][..])
    );
    let t = e.turn(&mut s, "the second one").await.unwrap();
    assert_eq!(t.debug.prediction.intent.as_deref(), Some("pay_bill"));
    assert!(t.replies[0].contains("Payments"), "{:?}", t.replies);
    assert!(s.pending_disambiguation.is_none());
}

#[tokio::test]
async fn apology_ladder_climbs_and_clamps() {
    let mut cfg = sample::banking();
    cfg.boosters.autocorrect = false;
    cfg.boosters.out_of_scope = false;
    cfg.thresholds.max_fallbacks_before_handoff = 50;
    let ladder = cfg.template("fallback").unwrap().variants[0].texts.clone();
    let e = engine_for(cfg);
    let mut s = e.start_session();
    for i in 0..12 {
        let t = e.turn(&mut s, "zorp blick").await.unwrap();
        assert_eq!(t.replies, [ladder[i.min(9)].clone()]);
    }
}

#[tokio::test]
async fn repeated_breakdown_hands_off() {
    let e = engine();
    let mut s = e.start_session();
    for _ in 0..2 {
        let t = e.turn(&mut s, "zorp blick").await.unwrap();
        assert!(!t
            .debug
            .actions
            .iter()
            .any(|a| matches!(a, Action::Handoff { .. })));
    }
    let t = e.turn(&mut s, "zorp blick").await.unwrap();
    assert!(t
        .debug
        .actions
        .iter()
        .any(|a| matches!(a, Action::Handoff { .. })));
    assert_eq!(
        t.replies.last().unwrap(),
        "I shall now direct you to an agent who can further assist you."
    );
}

#[tokio::test]
async fn abort_drops_the_active_task() {
    let e = engine();
    let mut s = e.start_session();
    e.turn(&mut s, sample::CONTEXT_SWITCH_SCRIPT[0])
        .await
        .unwrap();
    e.turn(&mut s, sample::CONTEXT_SWITCH_SCRIPT[1])
        .await
        .unwrap();
    let t = e.turn(&mut s, "never mind").await.unwrap();
    assert_eq!(t.debug.frames.len(), 1);
    assert_eq!(
        t.replies[0],
        "All right, I have cancelled the address change."
    );
    assert!(t.replies[1].contains("money transfer"));
}

#[tokio::test]
async fn denial_reopens_the_tasks() {
    let e = engine();
    let mut s = e.start_session();
    for line in &sample::CONTEXT_SWITCH_SCRIPT[..4] {
        e.turn(&mut s, line).await.unwrap();
    }
    let t = e.turn(&mut s, "No").await.unwrap();
    assert!(t.debug.awaiting_confirmation.is_empty());
    assert!(!t.debug.frames.is_empty());
    assert_eq!(
        t.replies[0],
        "No problem, let's go through the details again."
    );
}

#[tokio::test]
async fn handoff_summary_for_script() {
    let e = engine();
    let mut s = e.start_session();
    for line in sample::CONTEXT_SWITCH_SCRIPT {
        e.turn(&mut s, line).await.unwrap();
    }
    let (summary, act) = e.handoff(&s).await;
    let summary = summary.unwrap();
    assert!(summary.action_required.contains("400 USD"));
    assert_eq!(act.guard_outcome, GuardOutcome::Passed);
}

#[tokio::test]
async fn empty_text_is_rejected() {
    let e = engine();
    let mut s = e.start_session();
    assert!(e.turn(&mut s, "   ").await.is_err());
    assert!(s.transcript.is_empty());
}
