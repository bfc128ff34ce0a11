//! Regenerates `assets/banking/fixtures.yaml` by running the sample
//! scenarios against a scripted provider and recording every exchange.
//!
//! cargo run -p ca-core --example refresh_fixtures [OUT]

use std::sync::{Arc, Mutex};

use ca_core::accelerator::{Accelerator, Staging};
use ca_core::boosters::Boosters;
use ca_core::engine::{gateway_with, Engine};
use ca_core::llm::{prompt_hash, AuditLog, Fixture, FnProvider, LlmError};
use ca_core::sample;

/// (template id, prompt fragment, response). First match wins.
fn script() -> Vec<(&'static str, String, String)> {
    let mut rows: Vec<(&str, String, String)> = vec![
        ("autocorrect", sample::TYPO_UTTERANCE.into(), sample::TYPO_CORRECTION.into()),
        ("autocorrect", sample::TYPO_GARBAGE_UTTERANCE.into(), "Banana carburettor seventeen.".into()),
        ("autocorrect", "only.\nWhere is Germany?".into(), "Where is Germany?".into()),
        (
            "autocorrect",
            sample::AMBIGUOUS_UTTERANCE.into(),
            "I want to close the bill, please.".into(),
        ),
        (
            "closed_qa",
            "Question: What are the interest rates".into(),
            "Please call 001 23 45 89 01.".into(),
        ),
        ("closed_qa", "Question: Where is Germany?".into(), "Please call 001 23 45 89 01".into()),
        (
            "out_of_scope",
            "Question: Where is Germany?".into(),
            "Germany is a country located in Central Europe. It borders nine countries, among them France, \
             Poland and Austria, and its capital is Berlin."
                .into(),
        ),
        (
            "disambiguation",
            sample::AMBIGUOUS_UTTERANCE.into(),
            "Would you like to close an account, or do you want to pay a bill?".into(),
        ),
        (
            "summarize",
            "AA1 XZY.".into(),
            "Agent Action Required: Update the user's address and assist with the debit card replacement process.\n\
             Summary: The user needs a replacement debit card due to a damaged one. However, their address on file is \
             outdated. The user provided their new address as 1 Main Street, Capital City, Countryland, AA1 XZY."
                .into(),
        ),
        (
            "summarize",
            "User: I need to update my address\n---".into(),
            "The user wants a replacement for a damaged debit card and an address update.".into(),
        ),
        (
            "summarize_strict",
            "User: I need to update my address\n---".into(),
            "A replacement card is needed. The address must be updated first.".into(),
        ),
        (
            "summarize",
            "User: Yes".into(),
            "Agent Action Required: Check that the money transfer of 400 USD from account 334402 to account 831123 and \
             the address change to Park Avenue 14, 10012 New York were executed.\n\
             Summary: The user requested a money transfer and, before finishing it, an address change. Both tasks were \
             completed and confirmed by the user. The user also asked a general question about Germany."
                .into(),
        ),
        (
            "gen_intents",
            "10 most prominent intents".into(),
            "1. Check account balance - The client wants to know how much money is in their account.\n\
             2. View recent transactions - The client asks for a list of recent account activity.\n\
             3. Transfer funds between accounts - The client moves money to another account.\n\
             4. Pay a bill or set up recurring payments - The client settles invoices or schedules payments.\n\
             5. Update personal information - The client changes address, phone number or email.\n\
             6. Report a lost or stolen card - The client needs to block a card.\n\
             7. Apply for a loan - The client asks about loans or mortgages.\n\
             8. Open a new account - The client wants a savings or checking account.\n\
             9. Dispute a transaction - The client does not recognize a charge.\n\
             10. Ask about interest rates - The client wants current rates for savings or loans."
                .into(),
        ),
        (
            "gen_utterances",
            "intent called cancel_account".into(),
            "1.\tI would like to close my account with ABC Bank, please help me with the process.\n\
             2.\tCan you please guide me on how to cancel my account at ABC Bank?\n\
             3.\tI want to terminate my banking relationship with ABC Bank, how can I do that?\n\
             4.\tI'm thinking of closing my account, what is the procedure?\n\
             5.\tI've decided to cancel my ABC Bank account, can you assist me with this?\n\
             6.\tPlease help me shut down my account with your bank.\n\
             7.\tI no longer need my account at ABC Bank, how can I close it?\n\
             8.\tWhat's the process to deactivate my account with ABC Bank?\n\
             9.\tI would like to cancel my account; can you guide me through the steps?\n\
             10.\tI need to close my bank account, what information do you need from me?"
                .into(),
        ),
        (
            "gen_entities",
            "finance domain".into(),
            "account numbers, transaction amounts, dates, currency, transaction IDs, percentage rate, financial \
             product names, contact details, company names, bill or invoice numbers, tax-related terms, account \
             types, payment methods, financial goals and financial institutions."
                .into(),
        ),
        (
            "gen_synonyms",
            "\u{201c}insolvent\u{201d}".into(),
            "Bankrupt, Impoverished, Penniless, Financially ruined, Broke, Indigent, Destitute, Impecunious, In \
             default, In debt, Insufficient funds, Unable to pay debts, Financially distressed."
                .into(),
        ),
        (
            "gen_persona",
            "client advisor in private banking".into(),
            "A good client advisor in private banking possesses strong financial knowledge, excellent communication \
             and interpersonal skills, and a deep understanding of clients' needs and goals. They maintain high \
             ethical standards, practice discretion and confidentiality, and build long-lasting relationships based \
             on trust. Additionally, they demonstrate adaptability, staying updated on market trends and \
             regulations, and proactively identify opportunities to grow clients' wealth. They are also highly \
             organized, adept at problem-solving, and excel at collaborating with various stakeholders to deliver \
             tailored financial solutions."
                .into(),
        ),
        (
            "localize",
            "Translate these three statements".into(),
            "German: 1.\tEs tut mir leid, Ihnen mitteilen zu m\u{fc}ssen, dass das Produkt nicht mehr verf\u{fc}gbar ist.\n\
             2.\tIch bitte Sie inst\u{e4}ndig, die K\u{fc}ndigung Ihres Kontos zu \u{fc}berdenken.\n\
             3.\tIch werde Sie jetzt an einen Agenten weiterleiten, der Ihnen weiterhelfen kann.\n\
             Swiss German: 4.\tEs tuet mer leid, Ihne mitz'teile, dass s'Produkt n\u{fc}mme verf\u{fc}egbar isch.\n\
             5.\tIch bitte Sie inst\u{e4}ndig, d'Ch\u{fc}ndigung vo Ihrem Konto z'\u{fc}berdenke.\n\
             6.\tIch wird Sie jetzt zuenem Agent wyterleite, wo Ihnen cha wyterhelfe.\n\
             Spanish: 7.\tLamento informarle que el producto ya no est\u{e1} disponible.\n\
             8.\tLe imploro que reconsidere cancelar su cuenta.\n\
             9.\tAhora le dirigir\u{e9} a un agente que pueda asistirle m\u{e1}s.\n\
             French: 10.\tJe regrette de vous informer que le produit n'est plus disponible.\n\
             11.\tJe vous implore de reconsid\u{e9}rer l'annulation de votre compte.\n\
             12.\tJe vais maintenant vous diriger vers un agent qui pourra vous aider davantage."
                .into(),
        ),
    ];
    for (question, answer) in sample::CLOSED_QA_CASES.iter().take(4) {
        rows.push((
            "closed_qa",
            format!("Question: {question}"),
            answer.to_string(),
        ));
    }
    rows
}

fn excerpt(prompt: &str) -> String {
    let flat = prompt.split_whitespace().collect::<Vec<_>>().join(" ");
    let tail: String = flat
        .chars()
        .rev()
        .take(80)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if tail.len() < flat.len() {
        format!("...{tail}")
    } else {
        tail
    }
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/assets/banking/fixtures.yaml").to_string()
    });
    let rows = script();
    let recorded: Arc<Mutex<Vec<Fixture>>> = Arc::default();
    let sink = recorded.clone();
    let provider = FnProvider::new("recorder", move |req| {
        let hit = rows
            .iter()
            .find(|(id, needle, _)| *id == req.template_id && req.prompt.contains(needle.as_str()));
        let Some((_, _, response)) = hit else {
            eprintln!(
                "unscripted call: {} {:?}",
                req.template_id,
                excerpt(&req.prompt)
            );
            return Err(LlmError::MissingFixture {
                template_id: req.template_id.clone(),
                prompt_hash: prompt_hash(&req.prompt),
            });
        };
        let fixture = Fixture {
            template_id: req.template_id.clone(),
            prompt_hash: prompt_hash(&req.prompt),
            prompt_excerpt: excerpt(&req.prompt),
            response: response.clone(),
        };
        let mut all = sink.lock().unwrap();
        if !all
            .iter()
            .any(|f| f.template_id == fixture.template_id && f.prompt_hash == fixture.prompt_hash)
        {
            all.push(fixture);
        }
        Ok(response.clone())
    });

    let config = sample::banking();
    let gateway = Arc::new(gateway_with(
        &config,
        Arc::new(provider),
        Arc::new(AuditLog::in_memory()),
    ));
    let engine = Engine::new(Arc::new(config.clone()), gateway.clone())?;

    let mut state = engine.start_session();
    for line in sample::CONTEXT_SWITCH_SCRIPT {
        let turn = engine.turn(&mut state, line).await?;
        eprintln!("> {line}\n< {}", turn.replies.join("\n< "));
    }
    let _ = engine.handoff(&state).await;
    for line in [
        sample::TYPO_UTTERANCE,
        sample::TYPO_GARBAGE_UTTERANCE,
        sample::AMBIGUOUS_UTTERANCE,
    ] {
        let mut s = engine.start_session();
        let turn = engine.turn(&mut s, line).await?;
        eprintln!("> {line}\n< {}", turn.replies.join("\n< "));
    }

    let boosters = Boosters::new(&gateway, &config);
    for (question, _) in sample::CLOSED_QA_CASES {
        boosters.closed_qa(question, &[]).await;
    }
    let full = sample::handoff_transcript(sample::HANDOFF_TRANSCRIPT.len());
    let _ = boosters.summarize(&full).await;
    let _ = boosters.summarize(&sample::handoff_transcript(10)).await;

    let acc = Accelerator::new(&gateway, &config);
    let mut staging = Staging::default();
    acc.gen_intents(&mut staging, sample::GEN_DOMAIN, 10)
        .await?;
    acc.gen_utterances(
        &mut staging,
        "cancel_account",
        10,
        sample::GEN_UTTERANCE_CONSTRAINTS,
    )
    .await?;
    acc.gen_entities(&mut staging, sample::GEN_ENTITY_DOMAIN)
        .await?;
    acc.gen_synonyms(&mut staging, "financial_status", sample::GEN_SYNONYM_TERM)
        .await?;
    acc.gen_persona(&mut staging, &config.persona.role_description)
        .await?;
    let keys: Vec<String> = sample::LOCALIZE_KEYS
        .iter()
        .map(|s| s.to_string())
        .collect();
    let locales: Vec<String> = sample::LOCALIZE_LOCALES
        .iter()
        .map(|s| s.to_string())
        .collect();
    acc.localize(&mut staging, &keys, &locales).await?;

    let fixtures = recorded.lock().unwrap().clone();
    std::fs::write(&out, serde_yaml::to_string(&fixtures)?)?;
    eprintln!("wrote {} fixtures to {out}", fixtures.len());
    Ok(())
}
