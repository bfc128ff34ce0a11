use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use ca_core::boosters::{closed_qa_guard, rephrase_guard, Boosters, GuardOutcome};
use ca_core::dialog::{self, DialogState};
use ca_core::engine::{gateway_with, Engine};
use ca_core::llm::{AuditLog, FnProvider};
use ca_core::nlu;
use ca_core::project::{IntentDef, ProjectConfig, TrainingExample};
use ca_core::sample;
use proptest::prelude::*;

/// Brute-force tf-idf cosine over dense vectors, written independently of
/// the classifier.
fn dense_scores(docs: &[(String, Vec<String>)], query: &[String]) -> BTreeMap<String, f64> {
    let vocab: BTreeSet<&String> = docs.iter().flat_map(|(_, d)| d).collect();
    let vocab: Vec<&String> = vocab.into_iter().collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|w| {
            let df = docs.iter().filter(|(_, d)| d.contains(w)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let embed = |tokens: &[String]| -> Vec<f64> {
        vocab
            .iter()
            .zip(&idf)
            .map(|(w, idf)| tokens.iter().filter(|t| t == w).count() as f64 * idf)
            .collect()
    };
    let cosine = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    };
    let q = embed(query);
    let mut best = BTreeMap::new();
    for (intent, d) in docs {
        let s = cosine(&q, &embed(d));
        let e = best.entry(intent.clone()).or_insert(0.0f64);
        *e = e.max(s);
    }
    best
}

fn config_with(intents: Vec<IntentDef>) -> ProjectConfig {
    let mut cfg = sample::banking();
    cfg.intents = intents;
    cfg
}

fn corpus() -> impl Strategy<Value = (Vec<(usize, Vec<usize>)>, Vec<usize>)> {
    let doc = (0usize..3, prop::collection::vec(0usize..30, 1..8));
    (
        prop::collection::vec(doc, 1..=10),
        prop::collection::vec(0usize..34, 1..8),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cosine_matches_dense_oracle((docs, query) in corpus()) {
        let word = |i: &usize| format!("w{i}");
        let docs: Vec<(String, Vec<String>)> = docs
            .iter()
            .map(|(k, ws)| (format!("intent{k}"), ws.iter().map(word).collect()))
            .collect();
        let mut intents: Vec<IntentDef> = Vec::new();
        for (name, words) in &docs {
            if !intents.iter().any(|i| &i.name == name) {
                intents.push(IntentDef::new(name));
            }
            let def = intents.iter_mut().find(|i| &i.name == name).unwrap();
            def.examples.push(TrainingExample::human(words.join(" ")));
        }
        let model = nlu::train(&config_with(intents)).unwrap().with_top_k(10);
        let query: Vec<String> = query.iter().map(word).collect();
        let prediction = model.classify(&query.join(" ")).unwrap();
        let oracle = dense_scores(&docs, &query);
        prop_assert_eq!(prediction.ranked.len(), oracle.len());
        for r in &prediction.ranked {
            prop_assert!((r.score - oracle[&r.intent]).abs() < 1e-9, "{} {} {}", r.intent, r.score, oracle[&r.intent]);
        }
        let best = oracle.values().cloned().fold(0.0, f64::max);
        prop_assert!((prediction.confidence - best).abs() < 1e-9);
    }

    #[test]
    fn training_examples_retrieve_themselves((docs, _q) in corpus()) {
        let mut intents: Vec<IntentDef> = Vec::new();
        for (k, ws) in &docs {
            let name = format!("intent{k}");
            if !intents.iter().any(|i| i.name == name) {
                intents.push(IntentDef::new(&name));
            }
            let text = ws.iter().map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
            intents.iter_mut().find(|i| i.name == name).unwrap().examples.push(TrainingExample::human(text));
        }
        let model = nlu::train(&config_with(intents.clone())).unwrap();
        for def in &intents {
            for ex in &def.examples {
                let p = model.classify(&ex.text).unwrap();
                prop_assert!((p.confidence - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ladder_index_is_clamped_and_monotone(count in 0u32..40, len in 1usize..12) {
        let mut s = dialog::start_session();
        s.fallback_count = count;
        let i = dialog::fallback_variant_index(&s, len);
        prop_assert_eq!(i, (count as usize).min(len - 1));
        s.fallback_count = count + 1;
        prop_assert!(dialog::fallback_variant_index(&s, len) >= i);
    }

    #[test]
    fn rephrase_guard_keeps_values(candidate in ".{0,60}", value in "[0-9]{3,8}") {
        let original = format!("Transfer to {value} confirmed.");
        let (out, outcome) = rephrase_guard(&original, &candidate, std::slice::from_ref(&value));
        match outcome {
            GuardOutcome::Passed => {
                prop_assert_eq!(&out, &candidate);
                prop_assert!(out.contains(&value));
            }
            _ => prop_assert_eq!(out, original),
        }
    }
}

fn near_miss(answer: &str, pick: u8) -> String {
    match pick % 6 {
        0 => format!("{answer}."),
        1 => answer.trim_end_matches('.').to_string() + "!",
        2 => answer.to_uppercase(),
        3 => answer.replace(',', ";"),
        4 => format!("Answer: {answer}"),
        _ => format!("\"{answer}\""),
    }
}

#[test]
fn closed_qa_guard_is_total() {
    use rand::{Rng, SeedableRng};
    let policy = sample::banking().closed_qa;
    let mut allowed: BTreeSet<String> = policy.answers.iter().cloned().collect();
    allowed.insert(policy.default_answer.clone());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for i in 0..1000u32 {
        let output = if i % 2 == 0 {
            let len = rng.gen_range(0..80);
            (0..len)
                .map(|_| rng.gen_range(' '..='~'))
                .collect::<String>()
        } else {
            let a = &policy.answers[rng.gen_range(0..policy.answers.len())];
            near_miss(a, rng.gen())
        };
        let (answer, _) = closed_qa_guard(&policy, &output);
        assert!(allowed.contains(&answer), "{output:?} -> {answer:?}");
        checked += 1;
    }
    assert_eq!(checked, 1000);
}

#[tokio::test]
async fn closed_qa_booster_never_leaks_model_text() {
    let config = sample::banking();
    let outputs = [
        "Sure! Call us anytime.",
        "",
        "  ",
        "If you want to close an account call 001 23 45 89 28",
    ];
    for out in outputs {
        let provider = FnProvider::new("fixed", move |_| Ok(out.to_string()));
        let gateway = gateway_with(&config, Arc::new(provider), Arc::new(AuditLog::in_memory()));
        let (answer, _) = Boosters::new(&gateway, &config)
            .closed_qa("anything", &[])
            .await;
        assert!(
            answer == config.closed_qa.default_answer || config.closed_qa.answers.contains(&answer)
        );
    }
}

fn offline_engine() -> Engine {
    let mut cfg = sample::banking();
    cfg.boosters.autocorrect = false;
    cfg.boosters.out_of_scope = false;
    cfg.boosters.disambiguation = false;
    let gateway = gateway_with(
        &cfg,
        Arc::new(FnProvider::new("offline", |_| Ok(String::new()))),
        Arc::new(AuditLog::in_memory()),
    );
    Engine::new(Arc::new(cfg), Arc::new(gateway)).unwrap()
}

const MOVES: [&str; 12] = [
    "I would like to transfer money",
    "I need to change my address",
    "My bank account is 334402",
    "Send it to account 831123",
    "400 USD please",
    "It's Park Avenue 14",
    "I live in 10012 New York.",
    "Yes",
    "No",
    "never mind",
    "What is my account balance?",
    "zorp blick",
];

fn check_invariants(cfg: &ProjectConfig, s: &DialogState) -> Result<(), TestCaseError> {
    prop_assert!(s.frames.len() <= cfg.dialog.max_stack_depth);
    let forms: BTreeSet<&str> = s.frames.iter().map(|f| f.form.as_str()).collect();
    prop_assert_eq!(forms.len(), s.frames.len());
    for f in &s.frames {
        let def = cfg.form(&f.form).unwrap();
        for p in &f.pending {
            prop_assert!(!f.filled.contains_key(p));
            prop_assert!(def.slot(p).is_some());
        }
    }
    for w in s.awaiting_confirmation.windows(2) {
        prop_assert!(w[0].depth <= w[1].depth);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interleavings_keep_the_stack_sound(moves in prop::collection::vec(0usize..MOVES.len(), 1..16)) {
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        let engine = offline_engine();
        let run = || rt.block_on(async {
            let mut s = engine.start_session();
            let mut replies = Vec::new();
            for &m in &moves {
                let before = s.frames.len();
                let fallbacks_before = s.fallback_count;
                let t = engine.turn(&mut s, MOVES[m]).await.unwrap();
                assert!(!t.replies.is_empty());
                if s.fallback_count > fallbacks_before {
                    let handoff = t.debug.actions.iter().any(|a| matches!(a, dialog::Action::Handoff { .. }));
                    let max = engine.config().thresholds.max_fallbacks_before_handoff;
                    assert_eq!(handoff, s.fallback_count >= max);
                }
                let resumed = t.debug.actions.iter().any(|a| matches!(a, dialog::Action::ResumeFrame { .. }));
                if resumed {
                    assert!(before >= 2 && !s.frames.is_empty());
                }
                check_invariants(engine.config(), &s).unwrap();
                replies.push(t.replies);
            }
            replies
        });
        prop_assert_eq!(run(), run());
    }
}
