//! One conversational turn: NLU, dialog step, boosters, NLG.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boosters::{
    self, BoosterActivation, BoosterError, BoosterKind, Boosters, GuardOutcome, HandoffSummary,
};
use crate::dialog::{
    self, Action, Annotations, CompletedForm, ContextFrame, DialogState, TurnRecord,
};
use crate::llm::{build_provider, AuditLog, Gateway, LlmError, PromptRegistry, Provider};
use crate::nlg::{self, NlgError, RenderRequest};
use crate::nlu::{self, EntityExtractor, EntityMatch, IntentModel, IntentPrediction, NluError};
use crate::project::{validate, ProjectConfig, Violation};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("message text is empty")]
    EmptyText,
    #[error("project is invalid ({} violation(s))", .0.len())]
    InvalidProject(Vec<Violation>),
    #[error(transparent)]
    Training(#[from] NluError),
    #[error(transparent)]
    Provider(#[from] LlmError),
}

/// Everything the engine decided during a turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnDebug {
    pub prediction: IntentPrediction,
    pub entities: Vec<EntityMatch>,
    /// Frame stack after the turn, bottom first.
    pub frames: Vec<ContextFrame>,
    pub awaiting_confirmation: Vec<CompletedForm>,
    pub boosters: Vec<BoosterActivation>,
    pub template_keys: Vec<String>,
    pub actions: Vec<Action>,
    pub fallback_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub replies: Vec<String>,
    pub debug: TurnDebug,
}

/// Builds the gateway described by the project's provider settings.
pub fn build_gateway(
    config: &ProjectConfig,
    base_dir: &Path,
    audit: Arc<AuditLog>,
) -> Result<Gateway, LlmError> {
    let provider = build_provider(&config.llm, base_dir)?;
    Ok(gateway_with(config, provider, audit))
}

pub fn gateway_with(
    config: &ProjectConfig,
    provider: Arc<dyn Provider>,
    audit: Arc<AuditLog>,
) -> Gateway {
    let gateway = Gateway::new(
        PromptRegistry::with_overrides(&config.prompts),
        provider,
        audit,
    );
    if config.persona.role_description.trim().is_empty() {
        gateway
    } else {
        gateway.with_system_message(format!(
            "You are a {}.",
            config.persona.role_description.trim()
        ))
    }
}

pub struct Engine {
    config: Arc<ProjectConfig>,
    model: IntentModel,
    extractor: EntityExtractor,
    gateway: Arc<Gateway>,
}

struct TurnCtx {
    replies: Vec<String>,
    keys: Vec<String>,
    boosters: Vec<BoosterActivation>,
    executed: Vec<Action>,
}

impl Engine {
    /// Validates the project and trains the classifier.
    pub fn new(config: Arc<ProjectConfig>, gateway: Arc<Gateway>) -> Result<Self, EngineError> {
        let violations = validate(&config);
        if !violations.is_empty() {
            return Err(EngineError::InvalidProject(violations));
        }
        let model = nlu::train(&config)?;
        let extractor = EntityExtractor::new(&config);
        Ok(Self {
            config,
            model,
            extractor,
            gateway,
        })
    }

    pub fn config(&self) -> &ProjectConfig {
        &self.config
    }

    pub fn model(&self) -> &IntentModel {
        &self.model
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn start_session(&self) -> DialogState {
        dialog::start_session()
    }

    fn boosters(&self) -> Boosters<'_> {
        Boosters::new(&self.gateway, &self.config)
    }

    fn classify(&self, text: &str) -> IntentPrediction {
        self.model
            .classify(text)
            .unwrap_or_else(|_| IntentPrediction::none())
    }

    /// Runs one user turn, mutating `state` and appending the user and bot
    /// records to its transcript.
    pub async fn turn(
        &self,
        state: &mut DialogState,
        text: &str,
    ) -> Result<TurnOutcome, EngineError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(EngineError::EmptyText);
        }
        let cfg = &*self.config;
        let history = boosters::history(&state.transcript);
        let entities = self.extractor.extract(text);
        let mut activations = Vec::new();

        let resolved = state
            .pending_disambiguation
            .as_ref()
            .and_then(|opts| boosters::resolve_choice(&self.model, text, opts));
        let mut prediction = match &resolved {
            Some(p) => p.clone(),
            None => self.classify(text),
        };

        let gated = cfg.boosters.autocorrect
            && resolved.is_none()
            && prediction.confidence < cfg.thresholds.tau_intent
            && !dialog::handles_without_intent(cfg, state, &entities);
        if gated {
            let (corrected, mut act) = self.boosters().autocorrect(text, &history).await;
            if let Some(corrected) = corrected {
                let better = self.classify(&corrected);
                if boosters::accept_correction(&prediction, &better) {
                    prediction = better;
                } else {
                    act.guard_outcome = GuardOutcome::Rejected;
                }
            }
            activations.push(act);
        }

        let (mut next, actions) = dialog::step(cfg, state, &prediction, &entities, text);
        next.transcript = std::mem::take(&mut state.transcript);
        let mut ctx = TurnCtx {
            replies: Vec::new(),
            keys: Vec::new(),
            boosters: activations,
            executed: Vec::new(),
        };
        self.execute(&mut next, actions, &history, &mut ctx).await;
        if ctx.replies.is_empty() {
            let index = dialog::fallback_variant_index(&next, dialog::ladder_len(cfg));
            self.push_fallback(&mut next, index, &mut ctx);
        }

        let debug = TurnDebug {
            prediction: prediction.clone(),
            entities: entities.clone(),
            frames: next.frames.clone(),
            awaiting_confirmation: next.awaiting_confirmation.clone(),
            boosters: ctx.boosters.clone(),
            template_keys: ctx.keys.clone(),
            actions: ctx.executed.clone(),
            fallback_count: next.fallback_count,
        };
        next.transcript.push(TurnRecord {
            annotations: Some(Annotations {
                prediction: Some(prediction),
                entities,
                boosters: ctx.boosters,
                actions: ctx.executed,
                template_keys: ctx.keys,
            }),
            ..TurnRecord::user(text)
        });
        next.transcript
            .extend(ctx.replies.iter().map(TurnRecord::bot));
        next.updated_at = chrono::Utc::now();
        *state = next;
        Ok(TurnOutcome {
            replies: ctx.replies,
            debug,
        })
    }

    async fn execute(
        &self,
        state: &mut DialogState,
        actions: Vec<Action>,
        history: &[crate::llm::ChatMessage],
        ctx: &mut TurnCtx,
    ) {
        let cfg = &*self.config;
        let mut queue: std::collections::VecDeque<Action> = actions.into();
        while let Some(action) = queue.pop_front() {
            match &action {
                Action::AskSlot { form, slot } => {
                    let key = cfg
                        .form(form)
                        .and_then(|f| f.slot(slot))
                        .map(|s| s.prompt_template.clone())
                        .unwrap_or_default();
                    let rendered = nlg::render_slot_prompt(cfg, form, slot, state);
                    self.push_rendered(state, &key, rendered, ctx);
                }
                Action::CompleteForm { .. } => {}
                Action::ResumeFrame { form } => {
                    if let Some(def) = cfg.form(form) {
                        let filled = state.active().map(|f| f.filled.clone()).unwrap_or_default();
                        let bindings = dialog::frame_bindings(cfg, form, &filled);
                        let key = def.resume_template.clone();
                        self.respond(state, &key, bindings, history, ctx).await;
                    }
                }
                Action::Respond { template, bindings } => {
                    self.respond(state, template, bindings.clone(), history, ctx)
                        .await;
                }
                Action::InvokeBooster { kind, payload } => match kind {
                    BoosterKind::OutOfScope => {
                        let question = payload.get("question").cloned().unwrap_or_default();
                        let index = payload
                            .get("fallback_index")
                            .and_then(|i| i.parse().ok())
                            .unwrap_or(0);
                        if let Some(answer) = self.out_of_scope(&question, history, ctx).await {
                            ctx.replies.push(answer);
                            state.fallback_count = 0;
                            queue.retain(|a| !matches!(a, Action::Handoff { .. }));
                        } else {
                            self.push_fallback(state, index, ctx);
                        }
                        if !queue.iter().any(|a| matches!(a, Action::Handoff { .. })) {
                            queue.extend(dialog::reanchor_actions(cfg, state));
                        }
                    }
                    BoosterKind::Disambiguation => {
                        let get = |k: &str| payload.get(k).cloned().unwrap_or_default();
                        let (a, b) = (get("option_a"), get("option_b"));
                        let question = if cfg.boosters.disambiguation {
                            let (q, act) = self
                                .boosters()
                                .disambiguate(&get("utterance"), &a, &b, history)
                                .await;
                            ctx.boosters.push(act);
                            q
                        } else {
                            None
                        };
                        match question {
                            Some(q) => ctx.replies.push(q),
                            None => {
                                let name = |i: &str| {
                                    cfg.intent(i)
                                        .map_or_else(|| i.to_string(), |d| d.display_name())
                                };
                                let bindings = BTreeMap::from([
                                    ("option_a".to_string(), name(&a)),
                                    ("option_b".to_string(), name(&b)),
                                ]);
                                let key = cfg.dialog.disambiguation_template.clone();
                                self.respond(state, &key, bindings, history, ctx).await;
                            }
                        }
                    }
                    _ => {}
                },
                Action::Handoff { .. } => {
                    let key = cfg.dialog.handoff_template.clone();
                    self.respond(state, &key, BTreeMap::new(), history, ctx)
                        .await;
                }
            }
            ctx.executed.push(action);
        }
    }

    /// Closed-QA first (when enabled and it finds a real answer), then the
    /// general-knowledge answer. `None` when nothing usable came back.
    async fn out_of_scope(
        &self,
        question: &str,
        history: &[crate::llm::ChatMessage],
        ctx: &mut TurnCtx,
    ) -> Option<String> {
        let cfg = &*self.config;
        if !cfg.boosters.out_of_scope {
            return None;
        }
        if cfg.boosters.closed_qa_first && !cfg.closed_qa.answers.is_empty() {
            let (answer, act) = self.boosters().closed_qa(question, history).await;
            let found =
                act.guard_outcome == GuardOutcome::Passed && answer != cfg.closed_qa.default_answer;
            ctx.boosters.push(act);
            if found {
                return Some(answer);
            }
        }
        match self.boosters().answer_out_of_scope(question, history).await {
            Ok((answer, act)) => {
                ctx.boosters.push(act);
                Some(answer)
            }
            Err(act) => {
                ctx.boosters.push(act);
                None
            }
        }
    }

    fn push_fallback(&self, state: &mut DialogState, index: usize, ctx: &mut TurnCtx) {
        let cfg = &*self.config;
        let key = cfg.dialog.fallback_template.clone();
        let req = RenderRequest::new(&key, nlg::session_locale(cfg, state))
            .persona(state.persona.clone())
            .index(index);
        match nlg::render(cfg, &req) {
            Ok(text) => {
                ctx.keys.push(key);
                ctx.replies.push(text);
            }
            Err(e) => {
                tracing::warn!(error = %e, "fallback template failed to render");
                ctx.replies
                    .push("Sorry, I didn't understand that.".to_string());
            }
        }
    }

    fn push_rendered(
        &self,
        state: &mut DialogState,
        key: &str,
        rendered: Result<String, NlgError>,
        ctx: &mut TurnCtx,
    ) {
        match rendered {
            Ok(text) => {
                ctx.keys.push(key.to_string());
                ctx.replies.push(text);
            }
            Err(e) => {
                tracing::warn!(template = key, error = %e, "template failed to render");
                let index = dialog::fallback_variant_index(state, dialog::ladder_len(&self.config));
                self.push_fallback(state, index, ctx);
            }
        }
    }

    /// Renders a response template with round-robin variant rotation and,
    /// when the template asks for it, the rephrase booster.
    async fn respond(
        &self,
        state: &mut DialogState,
        key: &str,
        bindings: BTreeMap<String, String>,
        history: &[crate::llm::ChatMessage],
        ctx: &mut TurnCtx,
    ) {
        let cfg = &*self.config;
        let locale = nlg::session_locale(cfg, state).to_string();
        let len = nlg::variant_len(cfg, key, &locale, state.persona.as_deref());
        let index = nlg::next_rotation(state, key, len);
        let values: Vec<String> = bindings.values().cloned().collect();
        let req = RenderRequest::new(key, locale)
            .bindings(bindings)
            .persona(state.persona.clone())
            .index(index);
        let rendered = nlg::render(cfg, &req);
        let directive = cfg.template(key).and_then(|t| t.rephrase.clone());
        match (rendered, directive) {
            (Ok(text), Some(directive)) if cfg.boosters.rephrase => {
                let (text, act) = self
                    .boosters()
                    .rephrase(&text, &directive, &values, history)
                    .await;
                ctx.boosters.push(act);
                self.push_rendered(state, key, Ok(text), ctx);
            }
            (rendered, _) => self.push_rendered(state, key, rendered, ctx),
        }
    }

    /// Summarizes the session's transcript for a human agent.
    pub async fn handoff(
        &self,
        state: &DialogState,
    ) -> (Result<HandoffSummary, BoosterError>, BoosterActivation) {
        self.boosters().summarize(&state.transcript).await
    }
}
