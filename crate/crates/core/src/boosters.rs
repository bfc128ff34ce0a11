//! Runtime LLM interventions, each wrapped in a guard so the pipeline keeps
//! control of what reaches the user.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::dialog::{Speaker, TurnRecord};
use crate::llm::{ChatMessage, Gateway, LlmError};
use crate::nlu::{IntentModel, IntentPrediction};
use crate::project::{ClosedQAPolicy, ProjectConfig};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoosterKind {
    Autocorrect,
    OutOfScope,
    Disambiguation,
    Rephrase,
    ClosedQa,
    Summarize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardOutcome {
    Passed,
    SubstitutedDefault,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoosterActivation {
    pub kind: BoosterKind,
    pub input: String,
    pub output: String,
    pub guard_outcome: GuardOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Audit log ids of the LLM calls made by this run.
    #[serde(default)]
    pub exchange_ids: Vec<Uuid>,
}

impl BoosterActivation {
    fn new(kind: BoosterKind, input: &str) -> Self {
        Self {
            kind,
            input: input.to_string(),
            output: String::new(),
            guard_outcome: GuardOutcome::Passed,
            error: None,
            exchange_ids: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoffSummary {
    pub action_required: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoosterError {
    #[error("transcript has no user turn")]
    EmptyTranscript,
    #[error("summary is missing the required labels: {raw:?}")]
    FormatParse { raw: String },
    #[error(transparent)]
    Llm(#[from] LlmError),
}

pub const ACTION_LABEL: &str = "Agent Action Required:";
pub const SUMMARY_LABEL: &str = "Summary:";

fn bind<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn clean_field(s: &str) -> String {
    s.trim().trim_matches('*').trim().to_string()
}

/// Splits a two-label summary into its fields. Both labels must be present
/// and both fields non-empty.
pub fn parse_summary(raw: &str) -> Result<HandoffSummary, BoosterError> {
    let err = || BoosterError::FormatParse {
        raw: raw.to_string(),
    };
    let a = raw.find(ACTION_LABEL).ok_or_else(err)?;
    let s = raw.find(SUMMARY_LABEL).ok_or_else(err)?;
    let a_body = a + ACTION_LABEL.len();
    let s_body = s + SUMMARY_LABEL.len();
    let (action, summary) = if a < s {
        (&raw[a_body..s], &raw[s_body..])
    } else {
        (&raw[a_body..], &raw[s_body..a])
    };
    let out = HandoffSummary {
        action_required: clean_field(action),
        summary: clean_field(summary),
    };
    if out.action_required.is_empty() || out.summary.is_empty() {
        return Err(err());
    }
    Ok(out)
}

/// `Chatbot: ...` / `User: ...` lines.
pub fn format_transcript(transcript: &[TurnRecord]) -> String {
    transcript
        .iter()
        .map(|t| match t.speaker {
            Speaker::User => format!("User: {}", t.text),
            Speaker::Bot => format!("Chatbot: {}", t.text),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Transcript as chat history for the provider.
pub fn history(transcript: &[TurnRecord]) -> Vec<ChatMessage> {
    use crate::llm::Role;
    transcript
        .iter()
        .map(|t| match t.speaker {
            Speaker::User => ChatMessage::new(Role::User, &t.text),
            Speaker::Bot => ChatMessage::new(Role::Assistant, &t.text),
        })
        .collect()
}

/// The closed-QA hard guard: the normalized output must equal exactly one
/// allowed answer, otherwise the default answer is returned.
pub fn closed_qa_guard(policy: &ClosedQAPolicy, output: &str) -> (String, GuardOutcome) {
    let got = text::collapse_whitespace(output);
    let hits: Vec<&String> = policy
        .answers
        .iter()
        .filter(|a| text::collapse_whitespace(a) == got)
        .collect();
    match hits.as_slice() {
        [one] => ((*one).clone(), GuardOutcome::Passed),
        _ if text::collapse_whitespace(&policy.default_answer) == got => {
            (policy.default_answer.clone(), GuardOutcome::Passed)
        }
        _ => (
            policy.default_answer.clone(),
            GuardOutcome::SubstitutedDefault,
        ),
    }
}

/// The rephrase guard: every bound value must survive verbatim.
pub fn rephrase_guard(
    original: &str,
    candidate: &str,
    bound_values: &[String],
) -> (String, GuardOutcome) {
    let keeps_values = bound_values
        .iter()
        .filter(|v| !v.is_empty() && original.contains(v.as_str()))
        .all(|v| candidate.contains(v.as_str()));
    if keeps_values && !candidate.trim().is_empty() {
        (candidate.to_string(), GuardOutcome::Passed)
    } else {
        (original.to_string(), GuardOutcome::Rejected)
    }
}

/// The no-harm rule: a corrected utterance is used only if it classifies
/// with strictly higher confidence.
pub fn accept_correction(original: &IntentPrediction, corrected: &IntentPrediction) -> bool {
    corrected.intent.is_some() && corrected.confidence > original.confidence
}

/// Ordinal words per option, strongest first ("the second one" is the
/// second option).
const ORDINALS: [[&str; 4]; 2] = [
    ["first", "former", "1st", "1"],
    ["second", "latter", "2nd", "2"],
];
const NUMBERS: [&str; 2] = ["one", "two"];

/// Resolves the answer to a disambiguation question: an ordinal picks the
/// option, otherwise classification restricted to the two options.
pub fn resolve_choice(
    model: &IntentModel,
    text: &str,
    options: &[String],
) -> Option<IntentPrediction> {
    let tokens = text::normalize(text);
    let has = |w: &str| tokens.iter().any(|t| t == w);
    let ordinal = ORDINALS
        .iter()
        .position(|words| words.iter().any(|w| has(w)))
        .or_else(|| NUMBERS.iter().position(|w| has(w)))
        .and_then(|i| options.get(i));
    let restricted = model.classify_among(text, options).ok();
    match ordinal {
        Some(choice) => {
            let mut p = restricted.unwrap_or_else(IntentPrediction::none);
            p.intent = Some(choice.clone());
            Some(p)
        }
        None => restricted.filter(|p| p.intent.is_some()),
    }
}

fn display_intent(config: &ProjectConfig, name: &str) -> String {
    config
        .intent(name)
        .map_or_else(|| name.replace('_', " "), |i| i.display_name())
}

/// Booster entry points bound to one project and gateway.
pub struct Boosters<'a> {
    pub gateway: &'a Gateway,
    pub config: &'a ProjectConfig,
}

impl<'a> Boosters<'a> {
    pub fn new(gateway: &'a Gateway, config: &'a ProjectConfig) -> Self {
        Self { gateway, config }
    }

    async fn call(
        &self,
        activation: &mut BoosterActivation,
        template: &str,
        bindings: BTreeMap<String, String>,
        context: &[ChatMessage],
    ) -> Result<String, LlmError> {
        let result = self
            .gateway
            .complete(template, &bindings, context, None)
            .await;
        match &result {
            Ok(c) => activation.exchange_ids.push(c.exchange_id),
            Err(e) => activation.error = Some(e.to_string()),
        }
        result.map(|c| c.text)
    }

    /// LLM rewrite of a low-literacy utterance. `None` on provider error.
    pub async fn autocorrect(
        &self,
        utterance: &str,
        context: &[ChatMessage],
    ) -> (Option<String>, BoosterActivation) {
        let mut act = BoosterActivation::new(BoosterKind::Autocorrect, utterance);
        let out = self
            .call(
                &mut act,
                "autocorrect",
                bind([("utterance", utterance.to_string())]),
                context,
            )
            .await
            .ok()
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty());
        act.output = out.clone().unwrap_or_default();
        if out.is_none() {
            act.guard_outcome = GuardOutcome::Rejected;
        }
        (out, act)
    }

    /// Always one of the policy's answers or its default.
    pub async fn closed_qa(
        &self,
        question: &str,
        context: &[ChatMessage],
    ) -> (String, BoosterActivation) {
        let policy = &self.config.closed_qa;
        let mut act = BoosterActivation::new(BoosterKind::ClosedQa, question);
        let answers = policy
            .answers
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{}. {a}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        let bindings = bind([
            ("default_answer", policy.default_answer.clone()),
            ("answers", answers),
            ("question", question.to_string()),
        ]);
        let (answer, outcome) = match self
            .call(&mut act, &policy.prompt_template, bindings, context)
            .await
        {
            Ok(out) => closed_qa_guard(policy, &out),
            Err(_) => (
                policy.default_answer.clone(),
                GuardOutcome::SubstitutedDefault,
            ),
        };
        act.output = answer.clone();
        act.guard_outcome = outcome;
        (answer, act)
    }

    /// General-knowledge answer. A refusal is mapped to the closed-QA
    /// default answer. `Err` carries the failed activation.
    pub async fn answer_out_of_scope(
        &self,
        question: &str,
        context: &[ChatMessage],
    ) -> Result<(String, BoosterActivation), BoosterActivation> {
        let refusal = self.config.closed_qa.default_answer.clone();
        let mut act = BoosterActivation::new(BoosterKind::OutOfScope, question);
        let bindings = bind([
            ("refusal", refusal.clone()),
            ("question", question.to_string()),
        ]);
        match self.call(&mut act, "out_of_scope", bindings, context).await {
            Ok(out) if !out.trim().is_empty() => {
                let norm = text::collapse_whitespace(&out);
                let answer = if norm.trim_end_matches('.')
                    == text::collapse_whitespace(&refusal).trim_end_matches('.')
                {
                    act.guard_outcome = GuardOutcome::SubstitutedDefault;
                    refusal
                } else {
                    out.trim().to_string()
                };
                act.output = answer.clone();
                Ok((answer, act))
            }
            Ok(_) => {
                act.guard_outcome = GuardOutcome::Rejected;
                Err(act)
            }
            Err(_) => {
                act.guard_outcome = GuardOutcome::Rejected;
                Err(act)
            }
        }
    }

    /// Clarification question naming both readings; `None` when the LLM
    /// fails or omits an option (the caller renders the template instead).
    pub async fn disambiguate(
        &self,
        utterance: &str,
        option_a: &str,
        option_b: &str,
        context: &[ChatMessage],
    ) -> (Option<String>, BoosterActivation) {
        let a = display_intent(self.config, option_a);
        let b = display_intent(self.config, option_b);
        let mut act = BoosterActivation::new(BoosterKind::Disambiguation, utterance);
        let bindings = bind([
            ("utterance", utterance.to_string()),
            ("option_a", a.clone()),
            ("option_b", b.clone()),
        ]);
        let out = self
            .call(&mut act, "disambiguation", bindings, context)
            .await
            .ok();
        let lower = |s: &str| s.to_lowercase();
        let out = out.filter(|q| lower(q).contains(&lower(&a)) && lower(q).contains(&lower(&b)));
        match &out {
            Some(q) => act.output = q.clone(),
            None => act.guard_outcome = GuardOutcome::Rejected,
        }
        (out, act)
    }

    /// Restyled response, or the original when the guard rejects.
    pub async fn rephrase(
        &self,
        original: &str,
        directive: &str,
        bound_values: &[String],
        context: &[ChatMessage],
    ) -> (String, BoosterActivation) {
        let mut act = BoosterActivation::new(BoosterKind::Rephrase, original);
        let bindings = bind([
            ("directive", directive.to_string()),
            ("text", original.to_string()),
        ]);
        let (text, outcome) = match self.call(&mut act, "rephrase", bindings, context).await {
            Ok(out) => rephrase_guard(original, out.trim(), bound_values),
            Err(_) => (original.to_string(), GuardOutcome::Rejected),
        };
        act.output = text.clone();
        act.guard_outcome = outcome;
        (text, act)
    }

    /// Handoff summary with one stricter retry on a format error.
    pub async fn summarize(
        &self,
        transcript: &[TurnRecord],
    ) -> (Result<HandoffSummary, BoosterError>, BoosterActivation) {
        let formatted = format_transcript(transcript);
        let mut act = BoosterActivation::new(BoosterKind::Summarize, &formatted);
        if !transcript.iter().any(|t| t.speaker == Speaker::User) {
            act.guard_outcome = GuardOutcome::Rejected;
            return (Err(BoosterError::EmptyTranscript), act);
        }
        let mut last_err = BoosterError::FormatParse { raw: String::new() };
        for template in ["summarize", "summarize_strict"] {
            let bindings = bind([("transcript", formatted.clone())]);
            match self.call(&mut act, template, bindings, &[]).await {
                Ok(raw) => match parse_summary(&raw) {
                    Ok(summary) => {
                        act.output = raw;
                        act.error = None;
                        return (Ok(summary), act);
                    }
                    Err(e) => {
                        act.output = raw;
                        last_err = e;
                    }
                },
                Err(e) => {
                    act.guard_outcome = GuardOutcome::Rejected;
                    return (Err(e.into()), act);
                }
            }
        }
        act.guard_outcome = GuardOutcome::Rejected;
        act.error = Some(last_err.to_string());
        (Err(last_err), act)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;

    #[test]
    fn summary_labels() {
        let s = parse_summary("Agent Action Required: do X.\nSummary: it was Y.").unwrap();
        assert_eq!(s.action_required, "do X.");
        assert_eq!(s.summary, "it was Y.");
        let s = parse_summary("Summary: Y\n**Agent Action Required:** X").unwrap();
        assert_eq!((s.action_required.as_str(), s.summary.as_str()), ("X", "Y"));
        assert!(parse_summary("just text").is_err());
        assert!(parse_summary("Agent Action Required:\nSummary: y").is_err());
    }

    #[test]
    fn closed_qa_guard_cases() {
        let policy = sample::banking().closed_qa;
        let exact = policy.answers[2].clone();
        assert_eq!(
            closed_qa_guard(&policy, &format!("  {exact}\n")),
            (exact.clone(), GuardOutcome::Passed)
        );
        let (out, g) = closed_qa_guard(&policy, &format!("{exact}!"));
        assert_eq!(
            (out.as_str(), g),
            (
                policy.default_answer.as_str(),
                GuardOutcome::SubstitutedDefault
            )
        );
        let (out, _) = closed_qa_guard(&policy, "Call 001 23 45 89 01, please");
        assert_eq!(out, policy.default_answer);
    }

    #[test]
    fn rephrase_guard_cases() {
        let vals = vec!["831123".to_string()];
        let orig = "Send 400 USD to 831123?";
        assert_eq!(
            rephrase_guard(orig, "Shall I send it to 831123?", &vals).1,
            GuardOutcome::Passed
        );
        assert_eq!(
            rephrase_guard(orig, "Shall I send the money?", &vals),
            (orig.to_string(), GuardOutcome::Rejected)
        );
    }

    #[test]
    fn ordinal_choice() {
        let cfg = sample::banking();
        let model = crate::nlu::train(&cfg).unwrap();
        let opts = vec!["cancel_account".to_string(), "pay_bill".to_string()];
        let p = resolve_choice(&model, "the second one", &opts).unwrap();
        assert_eq!(p.intent.as_deref(), Some("pay_bill"));
        assert!(resolve_choice(&model, "zzz", &opts).is_none());
    }
}
