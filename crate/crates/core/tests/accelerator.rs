use std::sync::Arc;

use ca_core::accelerator::{
    approve, reject, Accelerator, AcceleratorError, ApproveOptions, StagedKind, StagedStatus,
    Staging,
};
use ca_core::llm::{AuditLog, Gateway};
use ca_core::nlg::{self, RenderRequest};
use ca_core::nlu;
use ca_core::project::{load_project, save_project, ProjectConfig, Provenance, TrainingExample};
use ca_core::sample;

fn gateway(cfg: &ProjectConfig) -> Gateway {
    sample::banking_gateway(cfg, Arc::new(AuditLog::in_memory()))
}

/// Banking project whose cancel_account intent has only a single seed.
fn seeded() -> ProjectConfig {
    let mut cfg = sample::banking();
    let cancel = cfg
        .intents
        .iter_mut()
        .find(|i| i.name == "cancel_account")
        .unwrap();
    cancel.examples = vec![TrainingExample::human("Close my account")];
    cfg
}

#[tokio::test]
async fn generated_utterances_need_approval() {
    let mut cfg = seeded();
    let gw = gateway(&cfg);
    let mut staging = Staging::default();
    let report = Accelerator::new(&gw, &cfg)
        .gen_utterances(
            &mut staging,
            "cancel_account",
            10,
            sample::GEN_UTTERANCE_CONSTRAINTS,
        )
        .await
        .unwrap();
    assert_eq!(report.staged.len(), 10);
    assert!(report
        .staged
        .iter()
        .all(|i| i.kind == StagedKind::Utterance && i.status == StagedStatus::Pending));

    let before = nlu::train(&cfg).unwrap().example_count();
    let usable_before = cfg.usable_example_count();

    // Generated examples in the project itself are still filtered out.
    let mut leaked = cfg.clone();
    leaked.intents[0].examples.push(TrainingExample {
        provenance: Provenance::Generated,
        ..TrainingExample::human(&report.staged[0].content)
    });
    assert_eq!(nlu::train(&leaked).unwrap().example_count(), before);

    let ids: Vec<String> = staging.pending().map(|i| i.id.clone()).collect();
    for id in &ids {
        approve(&mut cfg, &mut staging, id, &ApproveOptions::default()).unwrap();
    }
    assert_eq!(cfg.usable_example_count(), usable_before + 10);
    assert_eq!(nlu::train(&cfg).unwrap().example_count(), before + 10);

    let dir = tempfile::tempdir().unwrap();
    save_project(&cfg, dir.path()).unwrap();
    staging.save(dir.path()).unwrap();
    assert_eq!(load_project(dir.path()).unwrap(), cfg);
    assert_eq!(Staging::load(dir.path()).unwrap(), staging);
}

#[tokio::test]
async fn decisions_are_final() {
    let mut cfg = seeded();
    let gw = gateway(&cfg);
    let mut staging = Staging::default();
    Accelerator::new(&gw, &cfg)
        .gen_utterances(
            &mut staging,
            "cancel_account",
            10,
            sample::GEN_UTTERANCE_CONSTRAINTS,
        )
        .await
        .unwrap();
    let id = staging.items[0].id.clone();
    reject(&mut staging, &id).unwrap();
    assert_eq!(staging.get(&id).unwrap().status, StagedStatus::Rejected);
    assert!(matches!(
        approve(&mut cfg, &mut staging, &id, &ApproveOptions::default()),
        Err(AcceleratorError::AlreadyDecided(..))
    ));
    assert!(matches!(
        reject(&mut staging, "stg-9999"),
        Err(AcceleratorError::UnknownItem(_))
    ));
}

#[tokio::test]
async fn localization_merges_variants() {
    let mut cfg = sample::banking();
    let gw = gateway(&cfg);
    let mut staging = Staging::default();
    let keys: Vec<String> = sample::LOCALIZE_KEYS
        .iter()
        .map(|s| s.to_string())
        .collect();
    let locales: Vec<String> = sample::LOCALIZE_LOCALES
        .iter()
        .map(|s| s.to_string())
        .collect();
    let report = Accelerator::new(&gw, &cfg)
        .localize(&mut staging, &keys, &locales)
        .await
        .unwrap();
    assert_eq!(report.staged.len(), 12);
    let targets: std::collections::BTreeSet<&str> = report
        .staged
        .iter()
        .map(|i| i.target.split('@').nth(1).unwrap())
        .collect();
    assert_eq!(targets.len(), 4);

    for item in report.staged {
        approve(&mut cfg, &mut staging, &item.id, &ApproveOptions::default()).unwrap();
    }
    let de = nlg::render(&cfg, &RenderRequest::new("product_unavailable", "de")).unwrap();
    assert_eq!(de, "Es tut mir leid, Ihnen mitteilen zu m\u{fc}ssen, dass das Produkt nicht mehr verf\u{fc}gbar ist.");
    let ch = nlg::render(
        &cfg,
        &RenderRequest::new("reconsider_cancel", "de-CH-x-dialect"),
    )
    .unwrap();
    assert!(ch.starts_with("Ich bitte Sie inst\u{e4}ndig, d'Ch\u{fc}ndigung"));
    let fr = nlg::render(&cfg, &RenderRequest::new("agent_handoff", "fr-CA")).unwrap();
    assert!(fr.starts_with("Je vais maintenant"));
}

#[tokio::test]
async fn intents_entities_synonyms_and_persona() {
    let mut cfg = sample::banking();
    let gw = gateway(&cfg);
    let acc = Accelerator::new(&gw, &cfg);
    let mut staging = Staging::default();

    let intents = acc
        .gen_intents(&mut staging, sample::GEN_DOMAIN, 10)
        .await
        .unwrap();
    let names: Vec<&str> = intents.staged.iter().map(|i| i.target.as_str()).collect();
    assert!(names.contains(&"check_account_balance"));
    assert!(names.contains(&"transfer_funds"));
    assert_eq!(intents.duplicates, ["pay_bill"]);

    let entities = acc
        .gen_entities(&mut staging, sample::GEN_ENTITY_DOMAIN)
        .await
        .unwrap();
    assert_eq!(entities.staged.len() + entities.duplicates.len(), 15);

    let synonyms = acc
        .gen_synonyms(&mut staging, "financial_status", sample::GEN_SYNONYM_TERM)
        .await
        .unwrap();
    assert_eq!(
        synonyms.staged.len() + synonyms.duplicates.len() + synonyms.flagged.len(),
        13
    );
    assert!(synonyms.duplicates.iter().any(|d| d == "Bankrupt"));
    assert!(synonyms
        .staged
        .iter()
        .all(|s| s.target == "financial_status:insolvent"));

    let persona = acc
        .gen_persona(&mut staging, &cfg.persona.role_description)
        .await
        .unwrap();
    assert!(persona
        .staged
        .iter()
        .any(|t| t.content.contains("strong financial knowledge")));

    let intent_id = intents.staged[0].id.clone();
    assert!(matches!(
        approve(
            &mut cfg,
            &mut staging,
            &intent_id,
            &ApproveOptions::default()
        ),
        Err(AcceleratorError::Precondition(_))
    ));
    let opts = ApproveOptions {
        response: Some("balance_info".into()),
        ..Default::default()
    };
    approve(&mut cfg, &mut staging, &intent_id, &opts).unwrap();
    assert!(cfg.intent("check_account_balance").is_some());

    let syn = synonyms.staged[0].clone();
    approve(&mut cfg, &mut staging, &syn.id, &ApproveOptions::default()).unwrap();
    let found = ca_core::nlu::synonym_canonical(&cfg, "financial_status", &syn.content);
    assert_eq!(found.unwrap().as_deref(), Some("insolvent"));
}

#[tokio::test]
async fn generation_preconditions() {
    let cfg = sample::banking();
    let gw = gateway(&cfg);
    let acc = Accelerator::new(&gw, &cfg);
    let mut staging = Staging::default();
    assert!(matches!(
        acc.gen_utterances(&mut staging, "nope", 10, "").await,
        Err(AcceleratorError::UnknownIntent(_))
    ));
    assert!(matches!(
        acc.gen_synonyms(&mut staging, "amount", "x").await,
        Err(AcceleratorError::WrongEntityKind(_))
    ));
    assert!(matches!(
        acc.localize(&mut staging, &["fallback".into()], &["it".into()])
            .await,
        Err(AcceleratorError::UndeclaredLocale(_))
    ));
    assert!(matches!(
        acc.gen_intents(&mut staging, "banking", 3).await,
        Err(AcceleratorError::Llm { .. })
    ));
    assert!(staging.items.is_empty());
}
