use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{EntityKind, EntitySource, FormDef, ProjectConfig};
use crate::template;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    InvalidName,
    DuplicateName,
    UnknownReference,
    NoLocales,
    InvalidLocale,
    UntrainableIntent,
    NoHandler,
    EmptyText,
    InvalidPattern,
    DuplicateCanonical,
    SynonymConflict,
    EmptyForm,
    DuplicateSlot,
    TemplateSyntax,
    MissingDefaultLocale,
    UnresolvablePlaceholder,
    ClosedQa,
    Thresholds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Dotted path to the offending item, e.g. `forms.transfer.slots.dest_account`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

fn identifier_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z][a-z0-9_]*$").unwrap())
}

fn locale_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // language[-script][-region][-variant]*[-x-private]*
    RE.get_or_init(|| {
        Regex::new(r"^[a-zA-Z]{2,3}(-[a-zA-Z0-9]{2,8})*(-x(-[a-zA-Z0-9]{1,8})+)?$").unwrap()
    })
}

pub fn is_valid_locale(tag: &str) -> bool {
    locale_re().is_match(tag)
}

struct Report(Vec<Violation>);

impl Report {
    fn push(
        &mut self,
        kind: ViolationKind,
        location: impl Into<String>,
        message: impl Into<String>,
    ) {
        self.0.push(Violation {
            kind,
            location: location.into(),
            message: message.into(),
        });
    }

    fn duplicates<'a>(&mut self, section: &str, names: impl Iterator<Item = &'a str>) {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n) {
                self.push(
                    ViolationKind::DuplicateName,
                    format!("{section}.{n}"),
                    format!("duplicate name {n:?}"),
                );
            }
        }
    }

    fn identifier(&mut self, location: &str, name: &str) {
        if !identifier_re().is_match(name) {
            self.push(
                ViolationKind::InvalidName,
                location,
                format!("{name:?} is not a lowercase snake_case identifier"),
            );
        }
    }
}

/// Checks every project invariant and returns all violations found.
/// Never fails; an empty list means the project is valid.
pub fn validate(config: &ProjectConfig) -> Vec<Violation> {
    let mut r = Report(Vec::new());
    r.identifier("name", &config.name);
    check_locales(config, &mut r);
    check_thresholds(config, &mut r);
    check_intents(config, &mut r);
    check_entities(config, &mut r);
    check_forms(config, &mut r);
    check_templates(config, &mut r);
    check_policy(config, &mut r);
    check_closed_qa(config, &mut r);
    check_prompts(config, &mut r);
    r.0
}

fn check_locales(config: &ProjectConfig, r: &mut Report) {
    if config.locales.is_empty() {
        r.push(
            ViolationKind::NoLocales,
            "locales",
            "at least one locale is required",
        );
    }
    for tag in &config.locales {
        if !is_valid_locale(tag) {
            r.push(
                ViolationKind::InvalidLocale,
                format!("locales.{tag}"),
                format!("{tag:?} is not a BCP-47 language tag"),
            );
        }
    }
    r.duplicates("locales", config.locales.iter().map(String::as_str));
}

fn check_thresholds(config: &ProjectConfig, r: &mut Report) {
    let t = &config.thresholds;
    let in_range = |x: f64| (0.0..=1.0).contains(&x);
    if !(in_range(t.tau_oos) && in_range(t.tau_intent) && t.tau_oos < t.tau_intent) {
        r.push(
            ViolationKind::Thresholds,
            "thresholds",
            format!(
                "require 0 <= tau_oos < tau_intent <= 1, got tau_oos={} tau_intent={}",
                t.tau_oos, t.tau_intent
            ),
        );
    }
    if t.max_fallbacks_before_handoff < 1 {
        r.push(
            ViolationKind::Thresholds,
            "thresholds.max_fallbacks_before_handoff",
            "must be at least 1",
        );
    }
    if config.dialog.max_stack_depth < 1 {
        r.push(
            ViolationKind::Thresholds,
            "dialog.max_stack_depth",
            "must be at least 1",
        );
    }
}

fn check_intents(config: &ProjectConfig, r: &mut Report) {
    r.duplicates("intents", config.intents.iter().map(|i| i.name.as_str()));
    for intent in &config.intents {
        let loc = format!("intents.{}", intent.name);
        r.identifier(&loc, &intent.name);
        if !intent.examples.iter().any(|e| e.provenance.is_usable()) {
            r.push(
                ViolationKind::UntrainableIntent,
                &loc,
                "untrainable intent: no example with provenance human or approved",
            );
        }
        for (i, ex) in intent.examples.iter().enumerate() {
            if ex.text.trim().is_empty() {
                r.push(
                    ViolationKind::EmptyText,
                    format!("{loc}.examples[{i}]"),
                    "empty example text",
                );
            }
            if !config.locales.contains(&ex.locale) {
                r.push(
                    ViolationKind::UnknownReference,
                    format!("{loc}.examples[{i}]"),
                    format!("locale {:?} is not declared", ex.locale),
                );
            }
        }
        match &intent.response {
            Some(key) => {
                if config.template(key).is_none() {
                    r.push(
                        ViolationKind::UnknownReference,
                        format!("{loc}.response"),
                        format!("unknown template {key:?}"),
                    );
                }
            }
            None if config.form_for_intent(&intent.name).is_none() => r.push(
                ViolationKind::NoHandler,
                &loc,
                "intent triggers no form and has no response template",
            ),
            None => {}
        }
    }
}

fn check_entities(config: &ProjectConfig, r: &mut Report) {
    r.duplicates("entities", config.entities.iter().map(|e| e.name.as_str()));
    for entity in &config.entities {
        let loc = format!("entities.{}", entity.name);
        r.identifier(&loc, &entity.name);
        match &entity.source {
            EntitySource::Pattern { pattern, .. } => {
                if let Err(e) = Regex::new(pattern) {
                    r.push(
                        ViolationKind::InvalidPattern,
                        &loc,
                        format!("pattern does not compile: {e}"),
                    );
                }
            }
            EntitySource::Gazetteer { values } => {
                r.duplicates(&loc, values.iter().map(|v| v.canonical.as_str()));
                // normalized term -> canonical values it maps to
                let mut owners: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
                for v in values {
                    if text::normalize(&v.canonical).is_empty() {
                        r.push(ViolationKind::EmptyText, &loc, "empty canonical value");
                    }
                    for term in std::iter::once(&v.canonical).chain(&v.synonyms) {
                        let key = text::normalize(term).join(" ");
                        if key.is_empty() {
                            r.push(
                                ViolationKind::EmptyText,
                                format!("{loc}.{}", v.canonical),
                                "empty synonym",
                            );
                            continue;
                        }
                        owners.entry(key).or_default().insert(&v.canonical);
                    }
                }
                for (term, canon) in owners {
                    if canon.len() > 1 {
                        r.push(
                            ViolationKind::SynonymConflict,
                            format!("{loc}.{term}"),
                            format!("synonym {term:?} maps to several canonical values: {canon:?}"),
                        );
                    }
                }
            }
        }
    }
}

fn template_placeholders_within(
    config: &ProjectConfig,
    r: &mut Report,
    location: &str,
    key: &str,
    allowed: &BTreeSet<String>,
) {
    let Some(t) = config.template(key) else {
        r.push(
            ViolationKind::UnknownReference,
            location,
            format!("unknown template {key:?}"),
        );
        return;
    };
    let extra: Vec<_> = t.placeholders().difference(allowed).cloned().collect();
    if !extra.is_empty() {
        r.push(
            ViolationKind::UnresolvablePlaceholder,
            location,
            format!("template {key:?} uses placeholders that cannot be bound here: {extra:?}"),
        );
    }
}

fn check_forms(config: &ProjectConfig, r: &mut Report) {
    r.duplicates("forms", config.forms.iter().map(|f| f.name.as_str()));
    let mut triggers: HashMap<&str, &str> = HashMap::new();
    for form in &config.forms {
        let loc = format!("forms.{}", form.name);
        r.identifier(&loc, &form.name);
        if config.intent(&form.trigger_intent).is_none() {
            r.push(
                ViolationKind::UnknownReference,
                format!("{loc}.trigger_intent"),
                format!("unknown intent {:?}", form.trigger_intent),
            );
        }
        if let Some(other) = triggers.insert(&form.trigger_intent, &form.name) {
            r.push(
                ViolationKind::DuplicateName,
                format!("{loc}.trigger_intent"),
                format!(
                    "intent {:?} already triggers form {other:?}",
                    form.trigger_intent
                ),
            );
        }
        if form.slots.is_empty() {
            r.push(ViolationKind::EmptyForm, &loc, "form has no slots");
        }
        let mut seen = BTreeSet::new();
        for slot in &form.slots {
            let sloc = format!("{loc}.slots.{}", slot.name);
            if !seen.insert(slot.name.as_str()) {
                r.push(
                    ViolationKind::DuplicateSlot,
                    &sloc,
                    format!("duplicate slot {:?}", slot.name),
                );
            }
            r.identifier(&sloc, &slot.name);
            if config.entity(&slot.entity_type).is_none() {
                r.push(
                    ViolationKind::UnknownReference,
                    &sloc,
                    format!(
                        "slot {:?} references unknown entity {:?}",
                        slot.name, slot.entity_type
                    ),
                );
            }
        }
        let bindable = form_bindings(form);
        for slot in &form.slots {
            template_placeholders_within(
                config,
                r,
                &format!("{loc}.slots.{}.prompt_template", slot.name),
                &slot.prompt_template,
                &bindable,
            );
        }
        template_placeholders_within(
            config,
            r,
            &format!("{loc}.completion_template"),
            &form.completion_template,
            &bindable,
        );
        template_placeholders_within(
            config,
            r,
            &format!("{loc}.resume_template"),
            &form.resume_template,
            &bindable,
        );
    }
}

/// Slot names plus `task`, the form's display title.
fn form_bindings(form: &FormDef) -> BTreeSet<String> {
    let mut b: BTreeSet<String> = form.slots.iter().map(|s| s.name.clone()).collect();
    b.insert("task".into());
    b
}

fn check_templates(config: &ProjectConfig, r: &mut Report) {
    r.duplicates("templates", config.templates.iter().map(|t| t.key.as_str()));
    let default_locale = config.default_locale();
    for t in &config.templates {
        let loc = format!("templates.{}", t.key);
        if t.variants.is_empty() {
            r.push(ViolationKind::EmptyText, &loc, "template has no variants");
        }
        for v in &t.variants {
            let vloc = format!(
                "{loc}.{}{}",
                v.locale,
                v.persona
                    .as_deref()
                    .map(|p| format!("/{p}"))
                    .unwrap_or_default()
            );
            if !config.locales.contains(&v.locale) {
                r.push(
                    ViolationKind::UnknownReference,
                    &vloc,
                    format!("locale {:?} is not declared", v.locale),
                );
            }
            if let Some(p) = &v.persona {
                if !config.persona.style_tags.contains(p) {
                    r.push(
                        ViolationKind::UnknownReference,
                        &vloc,
                        format!("persona tag {p:?} is not a declared style tag"),
                    );
                }
            }
            if v.texts.is_empty() {
                r.push(ViolationKind::EmptyText, &vloc, "variant has no texts");
            }
            for (i, text) in v.texts.iter().enumerate() {
                if text.trim().is_empty() {
                    r.push(
                        ViolationKind::EmptyText,
                        format!("{vloc}[{i}]"),
                        "empty variant text",
                    );
                }
                if let Err(e) = template::parse(text) {
                    r.push(
                        ViolationKind::TemplateSyntax,
                        format!("{vloc}[{i}]"),
                        e.to_string(),
                    );
                }
            }
        }
        if t.variant(default_locale, None).is_none() {
            r.push(
                ViolationKind::MissingDefaultLocale,
                &loc,
                format!("no variant for default locale {default_locale:?} without persona"),
            );
        }
    }
}

fn check_policy(config: &ProjectConfig, r: &mut Report) {
    let p = &config.dialog;
    let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let none = BTreeSet::new();
    template_placeholders_within(
        config,
        r,
        "dialog.fallback_template",
        &p.fallback_template,
        &none,
    );
    template_placeholders_within(config, r, "dialog.deny_template", &p.deny_template, &none);
    template_placeholders_within(
        config,
        r,
        "dialog.handoff_template",
        &p.handoff_template,
        &none,
    );
    template_placeholders_within(
        config,
        r,
        "dialog.stack_full_template",
        &p.stack_full_template,
        &none,
    );
    template_placeholders_within(
        config,
        r,
        "dialog.confirmation_template",
        &p.confirmation_template,
        &set(&["tasks", "details"]),
    );
    template_placeholders_within(
        config,
        r,
        "dialog.abort_template",
        &p.abort_template,
        &set(&["task"]),
    );
    template_placeholders_within(
        config,
        r,
        "dialog.disambiguation_template",
        &p.disambiguation_template,
        &set(&["option_a", "option_b"]),
    );
    for intent in &config.intents {
        if let Some(key) = &intent.response {
            if config.template(key).is_some() {
                template_placeholders_within(
                    config,
                    r,
                    &format!("intents.{}.response", intent.name),
                    key,
                    &none,
                );
            }
        }
    }
    let mut hook = |field: &str, entity: &Option<String>, required: &[&str]| {
        let Some(name) = entity else { return };
        let loc = format!("dialog.{field}");
        match config.entity(name).map(|e| (e.kind(), &e.source)) {
            Some((EntityKind::Gazetteer, EntitySource::Gazetteer { values })) => {
                for want in required {
                    if !values.iter().any(|v| v.canonical == *want) {
                        r.push(
                            ViolationKind::UnknownReference,
                            &loc,
                            format!("gazetteer {name:?} lacks canonical value {want:?}"),
                        );
                    }
                }
            }
            Some(_) => r.push(
                ViolationKind::UnknownReference,
                &loc,
                format!("{name:?} is not a gazetteer entity"),
            ),
            None => r.push(
                ViolationKind::UnknownReference,
                &loc,
                format!("unknown entity {name:?}"),
            ),
        }
    };
    hook(
        "confirmation_entity",
        &p.confirmation_entity,
        &["affirm", "deny"],
    );
    hook("command_entity", &p.command_entity, &["abort"]);
}

fn check_closed_qa(config: &ProjectConfig, r: &mut Report) {
    let qa = &config.closed_qa;
    if qa.answers.is_empty() {
        r.push(
            ViolationKind::ClosedQa,
            "closed_qa.answers",
            "at least one answer is required",
        );
    }
    let mut seen = BTreeSet::new();
    for (i, a) in qa.answers.iter().enumerate() {
        let norm = text::collapse_whitespace(a);
        if norm.is_empty() {
            r.push(
                ViolationKind::ClosedQa,
                format!("closed_qa.answers[{i}]"),
                "empty answer",
            );
        } else if !seen.insert(norm) {
            r.push(
                ViolationKind::ClosedQa,
                format!("closed_qa.answers[{i}]"),
                "duplicate answer after normalization",
            );
        }
    }
    let default = text::collapse_whitespace(&qa.default_answer);
    if default.is_empty() {
        r.push(
            ViolationKind::ClosedQa,
            "closed_qa.default_answer",
            "default answer is required",
        );
    } else if seen.contains(&default) {
        r.push(
            ViolationKind::ClosedQa,
            "closed_qa.default_answer",
            "default answer must not be one of the answers",
        );
    }
}

fn check_prompts(config: &ProjectConfig, r: &mut Report) {
    r.duplicates("prompts", config.prompts.iter().map(|p| p.id.as_str()));
    for p in &config.prompts {
        let loc = format!("prompts.{}", p.id);
        if p.body.trim().is_empty() {
            r.push(ViolationKind::EmptyText, &loc, "empty prompt body");
        }
        if let Err(e) = template::parse(&p.body) {
            r.push(ViolationKind::TemplateSyntax, &loc, e.to_string());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locale_tags() {
        for ok in [
            "en",
            "de",
            "de-CH",
            "de-CH-x-dialect",
            "es-419",
            "zh-Hant-TW",
        ] {
            assert!(is_valid_locale(ok), "{ok}");
        }
        for bad in ["", "e", "english language", "de_CH", "-de"] {
            assert!(!is_valid_locale(bad), "{bad}");
        }
    }
}
