//! Dialog state tracking and the rule-based next-action policy.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::boosters::{BoosterActivation, BoosterKind};
use crate::nlu::{EntityMatch, IntentPrediction};
use crate::project::{FormDef, ProjectConfig};

/// Canonical values of the confirmation gazetteer.
pub const AFFIRM: &str = "affirm";
pub const DENY: &str = "deny";
/// Canonical value of the command gazetteer that drops the active task.
pub const ABORT: &str = "abort";

pub const HANDOFF_REASON: &str = "repeated breakdown";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextFrame {
    pub form: String,
    /// Slot name to normalized entity value.
    pub filled: BTreeMap<String, String>,
    /// Unfilled required slots, in form order.
    pub pending: Vec<String>,
}

impl ContextFrame {
    pub fn open(form: &FormDef) -> Self {
        Self {
            form: form.name.clone(),
            filled: BTreeMap::new(),
            pending: form.required_slots().map(|s| s.name.clone()).collect(),
        }
    }
}

/// A form whose slots are complete but whose completion waits for the
/// user's confirmation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedForm {
    pub form: String,
    pub filled: BTreeMap<String, String>,
    /// Stack position the frame occupied; earlier tasks are listed first.
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<IntentPrediction>,
    #[serde(default)]
    pub entities: Vec<EntityMatch>,
    #[serde(default)]
    pub boosters: Vec<BoosterActivation>,
    #[serde(default)]
    pub actions: Vec<Action>,
    #[serde(default)]
    pub template_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Annotations>,
}

impl TurnRecord {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            speaker: Speaker::User,
            text: text.into(),
            annotations: None,
        }
    }

    pub fn bot(text: impl Into<String>) -> Self {
        Self {
            speaker: Speaker::Bot,
            text: text.into(),
            annotations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    AskSlot {
        form: String,
        slot: String,
    },
    CompleteForm {
        form: String,
    },
    ResumeFrame {
        form: String,
    },
    Respond {
        template: String,
        bindings: BTreeMap<String, String>,
    },
    InvokeBooster {
        kind: BoosterKind,
        payload: BTreeMap<String, String>,
    },
    Handoff {
        reason: String,
    },
}

impl Action {
    fn respond(template: &str, bindings: BTreeMap<String, String>) -> Self {
        Action::Respond {
            template: template.to_string(),
            bindings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogState {
    pub session_id: String,
    /// Top of stack is the last element.
    pub frames: Vec<ContextFrame>,
    /// Consecutive unhandled turns.
    pub fallback_count: u32,
    pub transcript: Vec<TurnRecord>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default)]
    pub awaiting_confirmation: Vec<CompletedForm>,
    /// The two intents offered by the last disambiguation question.
    #[serde(default)]
    pub pending_disambiguation: Option<Vec<String>>,
    #[serde(default)]
    pub locale: Option<String>,
    #[serde(default)]
    pub persona: Option<String>,
    /// Per-template round-robin counters.
    #[serde(default)]
    pub rotation: BTreeMap<String, usize>,
}

/// Fresh state with an empty stack and transcript.
pub fn start_session() -> DialogState {
    let now = Utc::now();
    DialogState {
        session_id: Uuid::new_v4().to_string(),
        frames: Vec::new(),
        fallback_count: 0,
        transcript: Vec::new(),
        created_at: now,
        updated_at: now,
        awaiting_confirmation: Vec::new(),
        pending_disambiguation: None,
        locale: None,
        persona: None,
        rotation: BTreeMap::new(),
    }
}

impl DialogState {
    pub fn active(&self) -> Option<&ContextFrame> {
        self.frames.last()
    }

    pub fn has_user_turn(&self) -> bool {
        self.transcript.iter().any(|t| t.speaker == Speaker::User)
    }
}

/// `min(fallback_count, variant_count - 1)`.
pub fn fallback_variant_index(state: &DialogState, variant_count: usize) -> usize {
    (state.fallback_count as usize).min(variant_count.saturating_sub(1))
}

/// Number of texts in the default-locale apology ladder.
pub fn ladder_len(config: &ProjectConfig) -> usize {
    config
        .template(&config.dialog.fallback_template)
        .and_then(|t| t.variant(config.default_locale(), None))
        .map_or(1, |v| v.texts.len().max(1))
}

fn gazetteer_value<'a>(entities: &'a [EntityMatch], entity: Option<&str>) -> Option<&'a str> {
    let entity = entity?;
    entities
        .iter()
        .find(|e| e.entity == entity)
        .map(|e| e.value.as_str())
}

fn confirmation_reply<'a>(
    config: &ProjectConfig,
    state: &DialogState,
    entities: &'a [EntityMatch],
) -> Option<&'a str> {
    if state.awaiting_confirmation.is_empty() || !state.frames.is_empty() {
        return None;
    }
    gazetteer_value(entities, config.dialog.confirmation_entity.as_deref())
        .filter(|v| *v == AFFIRM || *v == DENY)
}

fn is_abort(config: &ProjectConfig, entities: &[EntityMatch]) -> bool {
    gazetteer_value(entities, config.dialog.command_entity.as_deref()) == Some(ABORT)
}

/// Assigns entities to pending slots of `frame` by entity type, in slot
/// order, each entity used at most once. Returns the number filled.
fn fill(form: &FormDef, frame: &mut ContextFrame, entities: &[EntityMatch]) -> usize {
    let mut used = vec![false; entities.len()];
    let mut filled = 0;
    let mut still_pending = Vec::new();
    for slot_name in std::mem::take(&mut frame.pending) {
        let entity_type = form.slot(&slot_name).map(|s| s.entity_type.as_str());
        let hit = entities
            .iter()
            .enumerate()
            .find(|(i, e)| !used[*i] && Some(e.entity.as_str()) == entity_type);
        match hit {
            Some((i, e)) => {
                used[i] = true;
                frame.filled.insert(slot_name, e.value.clone());
                filled += 1;
            }
            None => still_pending.push(slot_name),
        }
    }
    frame.pending = still_pending;
    filled
}

/// True when the turn is handled by the dialog state alone (a slot answer,
/// a confirmation reply, an abort or a disambiguation choice), so intent
/// confidence does not matter.
pub fn handles_without_intent(
    config: &ProjectConfig,
    state: &DialogState,
    entities: &[EntityMatch],
) -> bool {
    if confirmation_reply(config, state, entities).is_some() || is_abort(config, entities) {
        return true;
    }
    let Some(frame) = state.active() else {
        return false;
    };
    let Some(form) = config.form(&frame.form) else {
        return false;
    };
    let mut probe = frame.clone();
    fill(form, &mut probe, entities) > 0
}

/// The form's slot values plus its title, for template bindings.
pub fn frame_bindings(
    config: &ProjectConfig,
    form: &str,
    filled: &BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    let mut b = filled.clone();
    if let Some(f) = config.form(form) {
        b.insert("task".into(), f.display_title());
    }
    b
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Bindings of the confirmation template: `{tasks}` and `{details}` listing
/// every value awaiting confirmation.
pub fn confirmation_bindings(
    config: &ProjectConfig,
    state: &DialogState,
) -> BTreeMap<String, String> {
    let mut titles = Vec::new();
    let mut details = Vec::new();
    for done in &state.awaiting_confirmation {
        let Some(form) = config.form(&done.form) else {
            continue;
        };
        titles.push(form.display_title());
        let values: Vec<String> = form
            .slots
            .iter()
            .filter_map(|s| {
                done.filled
                    .get(&s.name)
                    .map(|v| format!("{}: {v}", s.display_label()))
            })
            .collect();
        details.push(format!("{} ({})", form.display_title(), values.join(", ")));
    }
    BTreeMap::from([
        ("tasks".to_string(), join_and(&titles)),
        ("details".to_string(), details.join("; ")),
    ])
}

fn confirmation_action(config: &ProjectConfig, state: &DialogState) -> Action {
    Action::respond(
        &config.dialog.confirmation_template,
        confirmation_bindings(config, state),
    )
}

fn ask_next(frame: &ContextFrame) -> Option<Action> {
    frame.pending.first().map(|slot| Action::AskSlot {
        form: frame.form.clone(),
        slot: slot.clone(),
    })
}

/// Actions that bring the user back to what the agent was waiting for:
/// the active frame's next slot, or the pending confirmation.
pub fn reanchor_actions(config: &ProjectConfig, state: &DialogState) -> Vec<Action> {
    if let Some(frame) = state.active() {
        return ask_next(frame).into_iter().collect();
    }
    if !state.awaiting_confirmation.is_empty() {
        return vec![confirmation_action(config, state)];
    }
    Vec::new()
}

/// Pops the completed top frame and emits what follows: the deferred or
/// immediate completion, then resumption of the frame underneath or the
/// confirmation gate once the stack is empty.
fn complete_top(config: &ProjectConfig, state: &mut DialogState, actions: &mut Vec<Action>) {
    let Some(frame) = state.frames.pop() else {
        return;
    };
    let Some(form) = config.form(&frame.form) else {
        return;
    };
    actions.push(Action::CompleteForm {
        form: frame.form.clone(),
    });
    if form.confirm_required {
        let done = CompletedForm {
            form: frame.form.clone(),
            filled: frame.filled.clone(),
            depth: state.frames.len(),
        };
        let pos = state
            .awaiting_confirmation
            .partition_point(|c| c.depth <= done.depth);
        state.awaiting_confirmation.insert(pos, done);
    } else {
        actions.push(Action::respond(
            &form.completion_template,
            frame_bindings(config, &frame.form, &frame.filled),
        ));
    }
    if let Some(top) = state.frames.last() {
        actions.push(Action::ResumeFrame {
            form: top.form.clone(),
        });
        actions.extend(ask_next(top));
    } else if let Some(gate) = confirmation_gate(config, state) {
        actions.push(gate);
    }
}

/// The confirmation request, once no frame is active and at least one
/// completed form awaits confirmation.
pub fn confirmation_gate(config: &ProjectConfig, state: &DialogState) -> Option<Action> {
    (state.frames.is_empty() && !state.awaiting_confirmation.is_empty())
        .then(|| confirmation_action(config, state))
}

/// Advances the dialog by one user turn. Deterministic in its inputs.
pub fn step(
    config: &ProjectConfig,
    state: &DialogState,
    prediction: &IntentPrediction,
    entities: &[EntityMatch],
    text: &str,
) -> (DialogState, Vec<Action>) {
    let mut s = state.clone();
    let mut actions = Vec::new();
    let thresholds = &config.thresholds;

    // A pending disambiguation is answered by choosing one of its options.
    let offered = s.pending_disambiguation.take();
    let chosen = offered
        .as_ref()
        .and_then(|opts| prediction.intent.as_ref().filter(|i| opts.contains(i)))
        .cloned();

    // Explicit abort drops the active task.
    if is_abort(config, entities) && (!s.frames.is_empty() || !s.awaiting_confirmation.is_empty()) {
        let task = match s.frames.pop() {
            Some(frame) => config
                .form(&frame.form)
                .map(FormDef::display_title)
                .unwrap_or(frame.form),
            None => {
                let titles: Vec<String> = s
                    .awaiting_confirmation
                    .drain(..)
                    .filter_map(|c| config.form(&c.form).map(FormDef::display_title))
                    .collect();
                join_and(&titles)
            }
        };
        actions.push(Action::respond(
            &config.dialog.abort_template,
            BTreeMap::from([("task".to_string(), task)]),
        ));
        if let Some(top) = s.frames.last() {
            actions.push(Action::ResumeFrame {
                form: top.form.clone(),
            });
            actions.extend(ask_next(top));
        } else if let Some(gate) = confirmation_gate(config, &s) {
            actions.push(gate);
        }
        s.fallback_count = 0;
        return (s, actions);
    }

    // Reply to the confirmation gate.
    if let Some(reply) = confirmation_reply(config, &s, entities) {
        let done = std::mem::take(&mut s.awaiting_confirmation);
        if reply == AFFIRM {
            for c in &done {
                if let Some(form) = config.form(&c.form) {
                    actions.push(Action::respond(
                        &form.completion_template,
                        frame_bindings(config, &c.form, &c.filled),
                    ));
                }
            }
        } else {
            for c in &done {
                if let Some(form) = config.form(&c.form) {
                    s.frames.push(ContextFrame::open(form));
                }
            }
            actions.push(Action::respond(
                &config.dialog.deny_template,
                BTreeMap::new(),
            ));
            actions.extend(s.frames.last().and_then(ask_next));
        }
        s.fallback_count = 0;
        return (s, actions);
    }

    let candidates: Vec<String> = prediction
        .ranked
        .iter()
        .filter(|r| r.score >= thresholds.tau_oos)
        .map(|r| r.intent.clone())
        .collect();
    let accepted = chosen.or_else(|| {
        let top = prediction.intent.clone()?;
        if prediction.confidence >= thresholds.tau_intent || candidates.len() < 2 {
            Some(top)
        } else {
            None
        }
    });

    // (a) context switch into a form not yet on the stack
    if let Some(form) = accepted.as_deref().and_then(|i| config.form_for_intent(i)) {
        if !s.frames.iter().any(|f| f.form == form.name) {
            s.fallback_count = 0;
            if s.frames.len() >= config.dialog.max_stack_depth {
                actions.push(Action::respond(
                    &config.dialog.stack_full_template,
                    BTreeMap::new(),
                ));
                actions.extend(reanchor_actions(config, &s));
                return (s, actions);
            }
            let mut frame = ContextFrame::open(form);
            fill(form, &mut frame, entities);
            s.frames.push(frame);
            if s.frames.last().is_some_and(|f| f.pending.is_empty()) {
                complete_top(config, &mut s, &mut actions);
            } else {
                actions.extend(s.frames.last().and_then(ask_next));
            }
            return (s, actions);
        }
    }

    // (b) slot filling in the active frame
    if let Some(frame) = s.frames.last_mut() {
        if let Some(form) = config.form(&frame.form) {
            let restated = accepted.as_deref() == Some(form.trigger_intent.as_str());
            let filled = fill(form, frame, entities);
            if filled > 0 || restated {
                s.fallback_count = 0;
                if frame.pending.is_empty() {
                    complete_top(config, &mut s, &mut actions);
                } else {
                    actions.extend(ask_next(frame));
                }
                return (s, actions);
            }
        }
    }

    // (c) an answerable intent outside of any form
    if let Some(intent) = accepted.as_deref().and_then(|i| config.intent(i)) {
        s.fallback_count = 0;
        if let Some(key) = &intent.response {
            actions.push(Action::respond(key, BTreeMap::new()));
        }
        actions.extend(reanchor_actions(config, &s));
        return (s, actions);
    }

    // (d) two plausible readings
    if candidates.len() >= 2 && prediction.confidence >= thresholds.tau_oos {
        let payload = BTreeMap::from([
            ("utterance".to_string(), text.to_string()),
            ("option_a".to_string(), candidates[0].clone()),
            ("option_b".to_string(), candidates[1].clone()),
        ]);
        s.pending_disambiguation = Some(candidates[..2].to_vec());
        actions.push(Action::InvokeBooster {
            kind: BoosterKind::Disambiguation,
            payload,
        });
        return (s, actions);
    }

    // (e) out of scope
    let index = fallback_variant_index(&s, ladder_len(config));
    actions.push(Action::InvokeBooster {
        kind: BoosterKind::OutOfScope,
        payload: BTreeMap::from([
            ("question".to_string(), text.to_string()),
            ("fallback_index".to_string(), index.to_string()),
        ]),
    });
    s.fallback_count += 1;
    if s.fallback_count >= thresholds.max_fallbacks_before_handoff {
        actions.push(Action::Handoff {
            reason: HANDOFF_REASON.to_string(),
        });
    }
    (s, actions)
}
