//! The domain project: intents, entities, forms, response templates,
//! persona, closed-QA policy and thresholds. Loaded from a directory of YAML
//! files and immutable afterwards.

mod io;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::llm::{PromptTemplate, ProviderConfig};
use crate::template;

pub(crate) use io::write_atomic as io_write_atomic;
pub use io::{
    load_project, parse_project, save_project, write_atomic_files, ProjectError, ProjectSources,
    FILES, MANIFEST,
};
pub use validate::{validate, Violation, ViolationKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub name: String,
    /// Free-text domain description fed to design-time prompts.
    pub domain: String,
    /// Default locale first.
    pub locales: Vec<String>,
    pub intents: Vec<IntentDef>,
    pub entities: Vec<EntityDef>,
    pub forms: Vec<FormDef>,
    pub templates: Vec<ResponseTemplate>,
    pub persona: PersonaDef,
    pub closed_qa: ClosedQAPolicy,
    pub thresholds: ThresholdConfig,
    pub dialog: DialogPolicy,
    pub boosters: BoosterSettings,
    pub llm: ProviderConfig,
    /// Project-level overrides of the built-in prompt registry.
    pub prompts: Vec<PromptTemplate>,
}

impl ProjectConfig {
    pub fn default_locale(&self) -> &str {
        self.locales.first().map(String::as_str).unwrap_or("en")
    }

    pub fn intent(&self, name: &str) -> Option<&IntentDef> {
        self.intents.iter().find(|i| i.name == name)
    }

    pub fn entity(&self, name: &str) -> Option<&EntityDef> {
        self.entities.iter().find(|e| e.name == name)
    }

    pub fn form(&self, name: &str) -> Option<&FormDef> {
        self.forms.iter().find(|f| f.name == name)
    }

    pub fn form_for_intent(&self, intent: &str) -> Option<&FormDef> {
        self.forms.iter().find(|f| f.trigger_intent == intent)
    }

    pub fn template(&self, key: &str) -> Option<&ResponseTemplate> {
        self.templates.iter().find(|t| t.key == key)
    }

    pub fn template_mut(&mut self, key: &str) -> Option<&mut ResponseTemplate> {
        self.templates.iter_mut().find(|t| t.key == key)
    }

    /// Examples the classifier may learn from.
    pub fn usable_example_count(&self) -> usize {
        self.intents
            .iter()
            .map(|i| {
                i.examples
                    .iter()
                    .filter(|e| e.provenance.is_usable())
                    .count()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Template answered when this intent is recognized outside of a form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default)]
    pub examples: Vec<TrainingExample>,
}

impl IntentDef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: None,
            response: None,
            examples: Vec::new(),
        }
    }

    pub fn display_name(&self) -> String {
        self.description
            .clone()
            .unwrap_or_else(|| self.name.replace('_', " "))
    }
}

fn default_locale() -> String {
    "en".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub text: String,
    #[serde(default = "default_locale")]
    pub locale: String,
    #[serde(default)]
    pub provenance: Provenance,
}

impl TrainingExample {
    pub fn human(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            locale: default_locale(),
            provenance: Provenance::Human,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Human,
    Generated,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("provenance cannot move from {from:?} to {to:?}")]
pub struct ProvenanceTransition {
    pub from: Provenance,
    pub to: Provenance,
}

impl Provenance {
    pub fn is_usable(self) -> bool {
        matches!(self, Provenance::Human | Provenance::Approved)
    }

    /// Only `generated -> approved` and `generated -> rejected` exist.
    pub fn transition(self, to: Provenance) -> Result<Provenance, ProvenanceTransition> {
        match (self, to) {
            (Provenance::Generated, Provenance::Approved | Provenance::Rejected) => Ok(to),
            _ => Err(ProvenanceTransition { from: self, to }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDef {
    pub name: String,
    #[serde(flatten)]
    pub source: EntitySource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntitySource {
    Pattern {
        pattern: String,
        #[serde(default)]
        normalizer: Normalizer,
    },
    Gazetteer {
        #[serde(default)]
        values: Vec<GazetteerValue>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Pattern,
    Gazetteer,
}

impl EntityDef {
    pub fn kind(&self) -> EntityKind {
        match self.source {
            EntitySource::Pattern { .. } => EntityKind::Pattern,
            EntitySource::Gazetteer { .. } => EntityKind::Gazetteer,
        }
    }

    pub fn gazetteer(name: impl Into<String>, values: Vec<GazetteerValue>) -> Self {
        Self {
            name: name.into(),
            source: EntitySource::Gazetteer { values },
        }
    }
}

/// How a pattern match is turned into the entity's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// The matched text, trimmed.
    #[default]
    Verbatim,
    /// Digits only.
    Digits,
    /// `<number> <ISO 4217 code>`.
    Amount,
    /// ISO `YYYY-MM-DD`, or `--MM-DD` when no year was given.
    Date,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerValue {
    pub canonical: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormDef {
    pub name: String,
    /// Human-readable task name used in confirmations ("money transfer").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub trigger_intent: String,
    pub slots: Vec<SlotDef>,
    pub completion_template: String,
    pub resume_template: String,
    #[serde(default)]
    pub confirm_required: bool,
}

impl FormDef {
    pub fn display_title(&self) -> String {
        self.title
            .clone()
            .unwrap_or_else(|| self.name.replace('_', " "))
    }

    pub fn slot(&self, name: &str) -> Option<&SlotDef> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn required_slots(&self) -> impl Iterator<Item = &SlotDef> {
        self.slots.iter().filter(|s| s.required)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(rename = "entity")]
    pub entity_type: String,
    pub prompt_template: String,
    #[serde(default = "yes")]
    pub required: bool,
}

impl SlotDef {
    pub fn display_label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.name.replace('_', " "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTemplate {
    pub key: String,
    /// Style directive; when set, the rephrase booster may restyle renders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rephrase: Option<String>,
    pub variants: Vec<TemplateVariant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateVariant {
    pub locale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<String>,
    pub texts: Vec<String>,
}

impl ResponseTemplate {
    /// Union of placeholder names across all variant texts. Texts with
    /// syntax errors contribute nothing (validation reports them).
    pub fn placeholders(&self) -> BTreeSet<String> {
        self.variants
            .iter()
            .flat_map(|v| v.texts.iter())
            .filter_map(|t| template::placeholders(t).ok())
            .flatten()
            .collect()
    }

    pub fn variant(&self, locale: &str, persona: Option<&str>) -> Option<&TemplateVariant> {
        self.variants
            .iter()
            .find(|v| v.locale == locale && v.persona.as_deref() == persona)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PersonaDef {
    #[serde(default)]
    pub role_description: String,
    #[serde(default)]
    pub traits: Vec<String>,
    #[serde(default)]
    pub style_tags: Vec<String>,
}

fn closed_qa_prompt() -> String {
    "closed_qa".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedQAPolicy {
    pub answers: Vec<String>,
    pub default_answer: String,
    #[serde(default = "closed_qa_prompt")]
    pub prompt_template: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub tau_intent: f64,
    pub tau_oos: f64,
    pub max_fallbacks_before_handoff: u32,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            tau_intent: 0.55,
            tau_oos: 0.35,
            max_fallbacks_before_handoff: 3,
        }
    }
}

/// Template keys and entity hooks the dialog manager relies on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DialogPolicy {
    pub max_stack_depth: usize,
    /// Ordered apology ladder.
    pub fallback_template: String,
    /// Placeholders: `{tasks}`, `{details}`.
    pub confirmation_template: String,
    pub deny_template: String,
    /// Placeholder: `{task}`.
    pub abort_template: String,
    pub handoff_template: String,
    pub stack_full_template: String,
    /// Placeholders: `{option_a}`, `{option_b}`.
    pub disambiguation_template: String,
    /// Gazetteer whose canonical values include `affirm` and `deny`.
    pub confirmation_entity: Option<String>,
    /// Gazetteer whose canonical value `abort` drops the active task.
    pub command_entity: Option<String>,
}

impl Default for DialogPolicy {
    fn default() -> Self {
        Self {
            max_stack_depth: 4,
            fallback_template: "fallback".into(),
            confirmation_template: "confirm_details".into(),
            deny_template: "confirmation_denied".into(),
            abort_template: "task_aborted".into(),
            handoff_template: "agent_handoff".into(),
            stack_full_template: "too_many_tasks".into(),
            disambiguation_template: "did_you_mean".into(),
            confirmation_entity: None,
            command_entity: None,
        }
    }
}

/// Runtime booster switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoosterSettings {
    pub autocorrect: bool,
    pub out_of_scope: bool,
    /// Try the closed-QA answer set before a general-knowledge answer.
    pub closed_qa_first: bool,
    pub disambiguation: bool,
    pub rephrase: bool,
}

impl Default for BoosterSettings {
    fn default() -> Self {
        Self {
            autocorrect: true,
            out_of_scope: true,
            closed_qa_first: true,
            disambiguation: true,
            rephrase: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_transitions() {
        use Provenance::*;
        assert_eq!(Generated.transition(Approved), Ok(Approved));
        assert_eq!(Generated.transition(Rejected), Ok(Rejected));
        assert!(Approved.transition(Generated).is_err());
        assert!(Rejected.transition(Approved).is_err());
        assert!(Human.transition(Approved).is_err());
    }

    #[test]
    fn thresholds_default() {
        let t = ThresholdConfig::default();
        assert_eq!(
            (t.tau_intent, t.tau_oos, t.max_fallbacks_before_handoff),
            (0.55, 0.35, 3)
        );
    }
}
