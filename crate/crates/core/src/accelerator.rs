//! Design-time generation of project content through the LLM, staged for
//! human review before anything reaches the project.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::llm::parse::{parse_list, parse_numbered_list};
use crate::llm::{Gateway, LlmError};
use crate::project::{
    io_write_atomic, validate, EntityDef, EntitySource, GazetteerValue, IntentDef, Normalizer,
    ProjectConfig, ProjectError, Provenance, TemplateVariant, TrainingExample, Violation,
};
use crate::text;

pub const STAGING_FILE: &str = "staging.yaml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StagedKind {
    Intent,
    Utterance,
    Entity,
    Synonym,
    PersonaTrait,
    TemplateLocalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StagedStatus {
    Pending,
    Approved,
    Rejected,
}

/// One generated suggestion. `target` locates it in the project: an intent
/// name, an entity name, `entity:canonical`, `persona`, or `key@locale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedItem {
    pub id: String,
    pub kind: StagedKind,
    pub target: String,
    pub content: String,
    pub created_at: DateTime<Utc>,
    pub status: StagedStatus,
    pub exchange_id: Uuid,
}

#[derive(Debug, Error)]
pub enum AcceleratorError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unknown intent {0:?}")]
    UnknownIntent(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("entity {0:?} is not a gazetteer")]
    WrongEntityKind(String),
    #[error("locale {0:?} is not declared by the project")]
    UndeclaredLocale(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("provider error")]
    Llm {
        #[source]
        error: LlmError,
    },
    #[error("could not parse model output: {reason}\n--- raw response ---\n{raw}")]
    Parse { reason: String, raw: String },
    #[error("unknown staged item {0:?}")]
    UnknownItem(String),
    #[error("staged item {0:?} was already {1:?}")]
    AlreadyDecided(String, StagedStatus),
    #[error("approval would leave the project invalid:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidApproval(Vec<Violation>),
    #[error("staging file: {0}")]
    StagingParse(String),
    #[error(transparent)]
    Project(#[from] ProjectError),
}

impl From<LlmError> for AcceleratorError {
    fn from(error: LlmError) -> Self {
        AcceleratorError::Llm { error }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Staging {
    #[serde(default)]
    pub items: Vec<StagedItem>,
}

impl Staging {
    pub fn parse(yaml: &str) -> Result<Self, AcceleratorError> {
        if yaml.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_yaml::from_str(yaml).map_err(|e| AcceleratorError::StagingParse(e.to_string()))
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("staging serializes")
    }

    /// Reads `staging.yaml` from a project directory; absent means empty.
    pub fn load(dir: &Path) -> Result<Self, AcceleratorError> {
        let path = dir.join(STAGING_FILE);
        match std::fs::read_to_string(&path) {
            Ok(s) => Self::parse(&s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(source) => Err(ProjectError::Io { path, source }.into()),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), AcceleratorError> {
        io_write_atomic(&dir.join(STAGING_FILE), &self.to_yaml())?;
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&StagedItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn pending(&self) -> impl Iterator<Item = &StagedItem> {
        self.items
            .iter()
            .filter(|i| i.status == StagedStatus::Pending)
    }

    fn next_id(&self) -> String {
        let max = self
            .items
            .iter()
            .filter_map(|i| i.id.strip_prefix("stg-")?.parse::<u32>().ok())
            .max()
            .unwrap_or(0);
        format!("stg-{:04}", max + 1)
    }

    /// Pending or approved item with the same kind, target and content.
    fn contains(&self, kind: StagedKind, target: &str, content: &str) -> bool {
        let key = dedupe_key(content);
        self.items.iter().any(|i| {
            i.kind == kind
                && i.target == target
                && i.status != StagedStatus::Rejected
                && dedupe_key(&i.content) == key
        })
    }

    fn stage(
        &mut self,
        kind: StagedKind,
        target: &str,
        content: &str,
        exchange_id: Uuid,
    ) -> StagedItem {
        let item = StagedItem {
            id: self.next_id(),
            kind,
            target: target.to_string(),
            content: content.to_string(),
            created_at: Utc::now(),
            status: StagedStatus::Pending,
            exchange_id,
        };
        self.items.push(item.clone());
        item
    }
}

fn dedupe_key(s: &str) -> String {
    text::normalize(s).join(" ")
}

/// Outcome of one generation command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub staged: Vec<StagedItem>,
    /// Items dropped because they already exist.
    pub duplicates: Vec<String>,
    /// Items withheld because they conflict with existing content.
    pub flagged: Vec<String>,
    pub raw: String,
}

impl GenReport {
    fn new(raw: String) -> Self {
        Self {
            raw,
            ..Default::default()
        }
    }
}

fn parse_err(reason: impl ToString, raw: &str) -> AcceleratorError {
    AcceleratorError::Parse {
        reason: reason.to_string(),
        raw: raw.to_string(),
    }
}

fn clean_item(item: &str) -> String {
    item.trim()
        .trim_matches('*')
        .trim()
        .trim_end_matches('.')
        .trim()
        .to_string()
}

/// Intent label of a list item: the text before an explanation separator.
fn intent_label(item: &str) -> String {
    let item = clean_item(item);
    let cut = [":", " - ", " \u{2013} ", " \u{2014} ", " ("]
        .iter()
        .filter_map(|sep| item.find(sep))
        .min()
        .unwrap_or(item.len());
    clean_item(&item[..cut])
}

/// Identifier for an intent label, shortened at the first connective once
/// at least two words are kept ("Pay a bill or set up ..." -> `pay_bill`).
pub fn intent_name(label: &str) -> String {
    const CONNECTIVES: [&str; 6] = ["or", "and", "between", "for", "from", "with"];
    let words: Vec<&str> = label.split_whitespace().collect();
    let cut = words
        .iter()
        .enumerate()
        .skip(2)
        .find(|(_, w)| CONNECTIVES.contains(&w.to_lowercase().as_str()))
        .map_or(words.len(), |(i, _)| i);
    text::slugify(&words[..cut].join(" "))
}

fn singular_key(name: &str) -> String {
    name.split('_')
        .map(|w| {
            if w.len() > 3 {
                w.strip_suffix('s').unwrap_or(w)
            } else {
                w
            }
        })
        .collect::<Vec<_>>()
        .join("_")
}

const PERSONA_VERBS: [&str; 20] = [
    "possess",
    "possesses",
    "maintain",
    "maintains",
    "practice",
    "practices",
    "practise",
    "build",
    "builds",
    "demonstrate",
    "demonstrates",
    "show",
    "shows",
    "have",
    "has",
    "are",
    "is",
    "display",
    "exhibit",
    "exhibits",
];

fn strip_leading_verb(phrase: &str) -> &str {
    let phrase = phrase.trim();
    let phrase = phrase.strip_prefix("and ").unwrap_or(phrase).trim();
    let phrase = phrase.strip_prefix("also ").unwrap_or(phrase).trim();
    match phrase.split_once(' ') {
        Some((first, rest)) if PERSONA_VERBS.contains(&first.to_lowercase().as_str()) => {
            rest.trim().strip_prefix("also ").unwrap_or(rest.trim())
        }
        _ => phrase,
    }
}

/// Trait phrases from a prose description: each sentence loses its subject
/// and main verb, then splits into its comma-separated items.
pub fn extract_traits(description: &str) -> Vec<String> {
    if let Ok(items) = parse_numbered_list(description) {
        return items
            .iter()
            .map(|i| intent_label(i))
            .filter(|i| !i.is_empty())
            .collect();
    }
    let mut traits = Vec::new();
    for sentence in description.split(['.', ';', '\n']) {
        let words: Vec<&str> = sentence.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        let body = match words
            .iter()
            .position(|w| PERSONA_VERBS.contains(&w.trim_matches(',').to_lowercase().as_str()))
        {
            Some(v) => words[v + 1..].join(" "),
            None => words.join(" "),
        };
        for item in body.split(", ") {
            let t = clean_item(strip_leading_verb(item));
            if !t.is_empty() {
                traits.push(t);
            }
        }
    }
    traits
}

fn count_word(n: usize) -> String {
    const WORDS: [&str; 10] = [
        "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS
        .get(n.wrapping_sub(1))
        .map_or_else(|| n.to_string(), |w| w.to_string())
}

/// English name of a locale tag for translation prompts.
pub fn language_name(tag: &str) -> String {
    const NAMES: [(&str, &str); 10] = [
        ("de-CH", "Swiss German"),
        ("de", "German"),
        ("en", "English"),
        ("es", "Spanish"),
        ("fr", "French"),
        ("it", "Italian"),
        ("pt", "Portuguese"),
        ("nl", "Dutch"),
        ("ja", "Japanese"),
        ("zh", "Chinese"),
    ];
    NAMES
        .iter()
        .filter(|(t, _)| tag == *t || tag.starts_with(&format!("{t}-")))
        .max_by_key(|(t, _)| t.len())
        .map_or_else(|| tag.to_string(), |(_, n)| n.to_string())
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn language_label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*[\p{L}][\p{L} ()-]*:\s*(\d)").unwrap())
}

/// Numbered items of a translation answer with `German:`-style labels
/// removed.
pub fn parse_translations(raw: &str) -> Result<Vec<String>, AcceleratorError> {
    let unlabeled: Vec<String> = raw
        .lines()
        .map(|l| match language_label_re().captures(l) {
            Some(c) => l[c.get(1).map_or(0, |m| m.start())..].to_string(),
            None => l.to_string(),
        })
        .collect();
    parse_numbered_list(&unlabeled.join("\n")).map_err(|e| parse_err(e, raw))
}

fn bind<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Generation commands bound to a project and gateway.
pub struct Accelerator<'a> {
    pub gateway: &'a Gateway,
    pub config: &'a ProjectConfig,
}

impl<'a> Accelerator<'a> {
    pub fn new(gateway: &'a Gateway, config: &'a ProjectConfig) -> Self {
        Self { gateway, config }
    }

    async fn call(
        &self,
        template: &str,
        bindings: BTreeMap<String, String>,
    ) -> Result<(String, Uuid), AcceleratorError> {
        let c = self
            .gateway
            .complete(template, &bindings, &[], None)
            .await?;
        Ok((c.text, c.exchange_id))
    }

    pub async fn gen_intents(
        &self,
        staging: &mut Staging,
        domain: &str,
        n: usize,
    ) -> Result<GenReport, AcceleratorError> {
        if n == 0 {
            return Err(AcceleratorError::Precondition(
                "n must be at least 1".into(),
            ));
        }
        let (raw, xid) = self
            .call(
                "gen_intents",
                bind([("n", n.to_string()), ("domain", domain.to_string())]),
            )
            .await?;
        let items = parse_numbered_list(&raw).map_err(|e| parse_err(e, &raw))?;
        let mut report = GenReport::new(raw);
        for item in items.iter().take(n) {
            let label = intent_label(item);
            let name = intent_name(&label);
            if name.is_empty() {
                continue;
            }
            if self.config.intent(&name).is_some()
                || staging.contains(StagedKind::Intent, &name, &label)
            {
                report.duplicates.push(name);
                continue;
            }
            if staging.items.iter().any(|i| {
                i.kind == StagedKind::Intent
                    && i.target == name
                    && i.status != StagedStatus::Rejected
            }) {
                report.duplicates.push(name);
                continue;
            }
            report
                .staged
                .push(staging.stage(StagedKind::Intent, &name, &label, xid));
        }
        Ok(report)
    }

    pub async fn gen_utterances(
        &self,
        staging: &mut Staging,
        intent: &str,
        n: usize,
        constraints: &str,
    ) -> Result<GenReport, AcceleratorError> {
        let def = self
            .config
            .intent(intent)
            .ok_or_else(|| AcceleratorError::UnknownIntent(intent.to_string()))?;
        if n == 0 {
            return Err(AcceleratorError::Precondition(
                "n must be at least 1".into(),
            ));
        }
        let constraints = constraints.trim();
        let constraints = if constraints.is_empty() {
            ".".to_string()
        } else {
            format!(", {constraints}")
        };
        let bindings = bind([
            ("n", n.to_string()),
            ("intent", intent.to_string()),
            ("constraints", constraints),
        ]);
        let (raw, xid) = self.call("gen_utterances", bindings).await?;
        let items = parse_numbered_list(&raw).map_err(|e| parse_err(e, &raw))?;
        let mut report = GenReport::new(raw);
        for item in items.iter().take(n) {
            let existing = def
                .examples
                .iter()
                .any(|e| dedupe_key(&e.text) == dedupe_key(item));
            if existing || staging.contains(StagedKind::Utterance, intent, item) {
                report.duplicates.push(item.clone());
                continue;
            }
            report
                .staged
                .push(staging.stage(StagedKind::Utterance, intent, item, xid));
        }
        Ok(report)
    }

    pub async fn gen_entities(
        &self,
        staging: &mut Staging,
        domain: &str,
    ) -> Result<GenReport, AcceleratorError> {
        let (raw, xid) = self
            .call("gen_entities", bind([("domain", domain.to_string())]))
            .await?;
        let items = parse_list(&raw).map_err(|e| parse_err(e, &raw))?;
        let mut report = GenReport::new(raw);
        for item in &items {
            let label = intent_label(item);
            let name = text::slugify(&label);
            if name.is_empty() {
                continue;
            }
            let exists = self
                .config
                .entities
                .iter()
                .any(|e| singular_key(&e.name) == singular_key(&name));
            let staged = staging.items.iter().any(|i| {
                i.kind == StagedKind::Entity
                    && i.status != StagedStatus::Rejected
                    && singular_key(&i.target) == singular_key(&name)
            });
            if exists || staged {
                report.duplicates.push(label);
                continue;
            }
            report
                .staged
                .push(staging.stage(StagedKind::Entity, &name, &label, xid));
        }
        Ok(report)
    }

    pub async fn gen_synonyms(
        &self,
        staging: &mut Staging,
        entity: &str,
        term: &str,
    ) -> Result<GenReport, AcceleratorError> {
        let def = self
            .config
            .entity(entity)
            .ok_or_else(|| AcceleratorError::UnknownEntity(entity.to_string()))?;
        let EntitySource::Gazetteer { values } = &def.source else {
            return Err(AcceleratorError::WrongEntityKind(entity.to_string()));
        };
        if text::normalize(term).is_empty() {
            return Err(AcceleratorError::Precondition("term is empty".into()));
        }
        let term_key = dedupe_key(term);
        let canonical = values
            .iter()
            .find(|v| dedupe_key(&v.canonical) == term_key)
            .map_or_else(|| term.trim().to_string(), |v| v.canonical.clone());
        let bindings = bind([
            ("domain", self.config.domain.clone()),
            ("term", term.trim().to_string()),
        ]);
        let (raw, xid) = self.call("gen_synonyms", bindings).await?;
        let items = parse_list(&raw).map_err(|e| parse_err(e, &raw))?;
        let target = format!("{entity}:{canonical}");
        let mut report = GenReport::new(raw);
        for item in &items {
            let key = dedupe_key(item);
            if key.is_empty() {
                continue;
            }
            let owner = values.iter().find(|v| {
                std::iter::once(&v.canonical)
                    .chain(&v.synonyms)
                    .any(|s| dedupe_key(s) == key)
            });
            match owner {
                Some(v) if v.canonical == canonical => report.duplicates.push(item.clone()),
                Some(v) => report
                    .flagged
                    .push(format!("{item} (already maps to {:?})", v.canonical)),
                None if key == term_key || staging.contains(StagedKind::Synonym, &target, item) => {
                    report.duplicates.push(item.clone())
                }
                None => report
                    .staged
                    .push(staging.stage(StagedKind::Synonym, &target, item, xid)),
            }
        }
        Ok(report)
    }

    pub async fn gen_persona(
        &self,
        staging: &mut Staging,
        role: &str,
    ) -> Result<GenReport, AcceleratorError> {
        if role.trim().is_empty() {
            return Err(AcceleratorError::Precondition(
                "role description is empty".into(),
            ));
        }
        let (raw, xid) = self
            .call("gen_persona", bind([("role", role.trim().to_string())]))
            .await?;
        let traits = extract_traits(&raw);
        if traits.is_empty() {
            return Err(parse_err("no traits found", &raw));
        }
        let mut report = GenReport::new(raw);
        for t in traits {
            let exists = self
                .config
                .persona
                .traits
                .iter()
                .any(|p| dedupe_key(p) == dedupe_key(&t));
            if exists || staging.contains(StagedKind::PersonaTrait, "persona", &t) {
                report.duplicates.push(t);
                continue;
            }
            report
                .staged
                .push(staging.stage(StagedKind::PersonaTrait, "persona", &t, xid));
        }
        Ok(report)
    }

    /// Stages one translation per (template, locale). Translations are of
    /// the first default-locale text of each template.
    pub async fn localize(
        &self,
        staging: &mut Staging,
        keys: &[String],
        locales: &[String],
    ) -> Result<GenReport, AcceleratorError> {
        if keys.is_empty() || locales.is_empty() {
            return Err(AcceleratorError::Precondition(
                "need at least one template and one locale".into(),
            ));
        }
        for l in locales {
            if !self.config.locales.contains(l) {
                return Err(AcceleratorError::UndeclaredLocale(l.clone()));
            }
        }
        let default = self.config.default_locale();
        let mut sources = Vec::new();
        for k in keys {
            let text = self
                .config
                .template(k)
                .and_then(|t| t.variant(default, None))
                .and_then(|v| v.texts.first())
                .ok_or_else(|| AcceleratorError::UnknownTemplate(k.clone()))?;
            sources.push(text.clone());
        }
        let statements = sources
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {s}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        let languages: Vec<String> = locales.iter().map(|l| language_name(l)).collect();
        let bindings = bind([
            ("count", count_word(keys.len())),
            ("languages", join_and(&languages)),
            ("statements", statements),
        ]);
        let (raw, xid) = self.call("localize", bindings).await?;
        let items = parse_translations(&raw)?;
        let expected = keys.len() * locales.len();
        if items.len() != expected {
            return Err(parse_err(
                format!("expected {expected} translations, got {}", items.len()),
                &raw,
            ));
        }
        let mut report = GenReport::new(raw);
        for (i, item) in items.iter().enumerate() {
            let key = &keys[i % keys.len()];
            let locale = &locales[i / keys.len()];
            let target = format!("{key}@{locale}");
            let exists = self
                .config
                .template(key)
                .and_then(|t| t.variant(locale, None))
                .is_some_and(|v| v.texts.iter().any(|t| t == item));
            if exists || staging.contains(StagedKind::TemplateLocalization, &target, item) {
                report.duplicates.push(item.clone());
                continue;
            }
            report
                .staged
                .push(staging.stage(StagedKind::TemplateLocalization, &target, item, xid));
        }
        Ok(report)
    }
}

/// Extra information a reviewer supplies when approving intents and
/// entities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApproveOptions {
    /// Response template for an approved intent.
    pub response: Option<String>,
    /// Regex for an approved entity; without it the entity becomes an
    /// empty gazetteer.
    pub pattern: Option<String>,
    pub normalizer: Normalizer,
}

fn decided(staging: &Staging, id: &str) -> Result<usize, AcceleratorError> {
    let idx = staging
        .items
        .iter()
        .position(|i| i.id == id)
        .ok_or_else(|| AcceleratorError::UnknownItem(id.to_string()))?;
    match staging.items[idx].status {
        StagedStatus::Pending => Ok(idx),
        s => Err(AcceleratorError::AlreadyDecided(id.to_string(), s)),
    }
}

fn merge(
    config: &mut ProjectConfig,
    item: &StagedItem,
    opts: &ApproveOptions,
) -> Result<(), AcceleratorError> {
    match item.kind {
        StagedKind::Intent => {
            let response = opts.response.clone().ok_or_else(|| {
                AcceleratorError::Precondition(
                    "approving an intent needs a response template".into(),
                )
            })?;
            let mut intent = IntentDef::new(&item.target);
            intent.description = Some(item.content.clone());
            intent.response = Some(response);
            intent.examples.push(TrainingExample {
                text: item.content.clone(),
                locale: config.default_locale().to_string(),
                provenance: Provenance::Approved,
            });
            config.intents.push(intent);
        }
        StagedKind::Utterance => {
            let locale = config.default_locale().to_string();
            let intent = config
                .intents
                .iter_mut()
                .find(|i| i.name == item.target)
                .ok_or_else(|| AcceleratorError::UnknownIntent(item.target.clone()))?;
            let provenance = Provenance::Generated
                .transition(Provenance::Approved)
                .expect("generated may be approved");
            intent.examples.push(TrainingExample {
                text: item.content.clone(),
                locale,
                provenance,
            });
        }
        StagedKind::Entity => {
            let source = match &opts.pattern {
                Some(pattern) => EntitySource::Pattern {
                    pattern: pattern.clone(),
                    normalizer: opts.normalizer,
                },
                None => EntitySource::Gazetteer { values: Vec::new() },
            };
            config.entities.push(EntityDef {
                name: item.target.clone(),
                source,
            });
        }
        StagedKind::Synonym => {
            let (entity, canonical) = item
                .target
                .split_once(':')
                .ok_or_else(|| AcceleratorError::UnknownEntity(item.target.clone()))?;
            let def = config
                .entities
                .iter_mut()
                .find(|e| e.name == entity)
                .ok_or_else(|| AcceleratorError::UnknownEntity(entity.to_string()))?;
            let EntitySource::Gazetteer { values } = &mut def.source else {
                return Err(AcceleratorError::WrongEntityKind(entity.to_string()));
            };
            match values.iter_mut().find(|v| v.canonical == canonical) {
                Some(v) => v.synonyms.push(item.content.clone()),
                None => values.push(GazetteerValue {
                    canonical: canonical.to_string(),
                    synonyms: vec![item.content.clone()],
                }),
            }
        }
        StagedKind::PersonaTrait => config.persona.traits.push(item.content.clone()),
        StagedKind::TemplateLocalization => {
            let (key, locale) = item
                .target
                .split_once('@')
                .ok_or_else(|| AcceleratorError::UnknownTemplate(item.target.clone()))?;
            let t = config
                .template_mut(key)
                .ok_or_else(|| AcceleratorError::UnknownTemplate(key.to_string()))?;
            match t
                .variants
                .iter_mut()
                .find(|v| v.locale == locale && v.persona.is_none())
            {
                Some(v) => v.texts.push(item.content.clone()),
                None => t.variants.push(TemplateVariant {
                    locale: locale.to_string(),
                    persona: None,
                    texts: vec![item.content.clone()],
                }),
            }
        }
    }
    Ok(())
}

/// Merges a pending item into `config` and marks it approved. The project
/// must still validate afterwards; otherwise nothing changes.
pub fn approve(
    config: &mut ProjectConfig,
    staging: &mut Staging,
    id: &str,
    opts: &ApproveOptions,
) -> Result<StagedItem, AcceleratorError> {
    let idx = decided(staging, id)?;
    let mut candidate = config.clone();
    merge(&mut candidate, &staging.items[idx], opts)?;
    let violations = validate(&candidate);
    if !violations.is_empty() {
        return Err(AcceleratorError::InvalidApproval(violations));
    }
    *config = candidate;
    staging.items[idx].status = StagedStatus::Approved;
    Ok(staging.items[idx].clone())
}

/// Marks a pending item rejected; it stays in staging for audit.
pub fn reject(staging: &mut Staging, id: &str) -> Result<StagedItem, AcceleratorError> {
    let idx = decided(staging, id)?;
    staging.items[idx].status = StagedStatus::Rejected;
    Ok(staging.items[idx].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intent_names() {
        assert_eq!(
            intent_name(&intent_label("Check account balance ...")),
            "check_account_balance"
        );
        assert_eq!(
            intent_name(&intent_label("Transfer funds between accounts: move money")),
            "transfer_funds"
        );
        assert_eq!(
            intent_name(&intent_label("Pay a bill or set up recurring payments")),
            "pay_bill"
        );
        assert_eq!(
            intent_name(&intent_label(
                "**Update personal information** - e.g. address"
            )),
            "update_personal_information"
        );
    }

    #[test]
    fn languages() {
        assert_eq!(language_name("de-CH-x-dialect"), "Swiss German");
        assert_eq!(language_name("de"), "German");
        assert_eq!(language_name("xx"), "xx");
        assert_eq!(
            join_and(&[
                "German".into(),
                "Swiss German".into(),
                "Spanish".into(),
                "French".into()
            ]),
            "German, Swiss German, Spanish and French"
        );
    }

    #[test]
    fn translation_labels_are_removed() {
        let raw = "German: 1.\tEins\n2.\tZwei\nSwiss German: 3.\tDrü\n";
        assert_eq!(parse_translations(raw).unwrap(), ["Eins", "Zwei", "Drü"]);
    }

    #[test]
    fn staging_ids_and_decisions() {
        let mut s = Staging::default();
        let a = s.stage(StagedKind::PersonaTrait, "persona", "calm", Uuid::nil());
        let b = s.stage(StagedKind::PersonaTrait, "persona", "kind", Uuid::nil());
        assert_eq!((a.id.as_str(), b.id.as_str()), ("stg-0001", "stg-0002"));
        reject(&mut s, &a.id).unwrap();
        assert!(matches!(
            reject(&mut s, &a.id),
            Err(AcceleratorError::AlreadyDecided(_, StagedStatus::Rejected))
        ));
        assert!(matches!(
            reject(&mut s, "stg-9999"),
            Err(AcceleratorError::UnknownItem(_))
        ));
        let back = Staging::parse(&s.to_yaml()).unwrap();
        assert_eq!(back, s);
        assert_eq!(Staging::parse("").unwrap(), Staging::default());
    }
}
