//! Template-based response rendering with locale and persona variants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::DialogState;
use crate::project::{ProjectConfig, TemplateVariant};
use crate::template::{self, TemplateError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NlgError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("missing binding {{{0}}}")]
    MissingBinding(String),
    #[error("template syntax: {0}")]
    Syntax(String),
}

impl From<TemplateError> for NlgError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::MissingBinding(n) => NlgError::MissingBinding(n),
            other => NlgError::Syntax(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RenderRequest {
    pub key: String,
    pub bindings: BTreeMap<String, String>,
    pub locale: String,
    pub persona: Option<String>,
    pub variant_index: Option<usize>,
}

impl RenderRequest {
    pub fn new(key: impl Into<String>, locale: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            locale: locale.into(),
            ..Default::default()
        }
    }

    pub fn bindings(mut self, bindings: BTreeMap<String, String>) -> Self {
        self.bindings = bindings;
        self
    }

    pub fn persona(mut self, persona: Option<String>) -> Self {
        self.persona = persona;
        self
    }

    pub fn index(mut self, index: usize) -> Self {
        self.variant_index = Some(index);
        self
    }
}

/// `de-CH-x-dialect` -> `[de-CH-x-dialect, de-CH-x, de-CH, de, <default>]`.
fn locale_chain(locale: &str, default: &str) -> Vec<String> {
    let parts: Vec<&str> = locale.split('-').collect();
    let mut chain: Vec<String> = (1..=parts.len())
        .rev()
        .map(|n| parts[..n].join("-"))
        .collect();
    if !chain.iter().any(|l| l == default) {
        chain.push(default.to_string());
    }
    chain
}

/// Variant for (locale, persona): the locale falls back along its tag
/// prefixes to the default locale; within a locale the persona variant is
/// preferred over the persona-less one.
pub fn select_variant<'a>(
    config: &'a ProjectConfig,
    key: &str,
    locale: &str,
    persona: Option<&str>,
) -> Result<&'a TemplateVariant, NlgError> {
    let t = config
        .template(key)
        .ok_or_else(|| NlgError::UnknownTemplate(key.to_string()))?;
    for loc in locale_chain(locale, config.default_locale()) {
        if let Some(p) = persona {
            if let Some(v) = t.variant(&loc, Some(p)) {
                return Ok(v);
            }
        }
        if let Some(v) = t.variant(&loc, None) {
            return Ok(v);
        }
    }
    t.variants
        .iter()
        .find(|v| !v.texts.is_empty())
        .ok_or_else(|| NlgError::UnknownTemplate(key.to_string()))
}

/// Renders one template text. Pure.
pub fn render(config: &ProjectConfig, request: &RenderRequest) -> Result<String, NlgError> {
    let variant = select_variant(
        config,
        &request.key,
        &request.locale,
        request.persona.as_deref(),
    )?;
    let Some(last) = variant.texts.len().checked_sub(1) else {
        return Err(NlgError::UnknownTemplate(request.key.clone()));
    };
    let text = &variant.texts[request.variant_index.unwrap_or(0).min(last)];
    Ok(template::render(text, &request.bindings)?)
}

/// Number of texts of the variant `render` would pick.
pub fn variant_len(
    config: &ProjectConfig,
    key: &str,
    locale: &str,
    persona: Option<&str>,
) -> usize {
    select_variant(config, key, locale, persona).map_or(0, |v| v.texts.len())
}

/// Locale of a session, defaulting to the project's.
pub fn session_locale<'a>(config: &'a ProjectConfig, state: &'a DialogState) -> &'a str {
    state.locale.as_deref().unwrap_or(config.default_locale())
}

/// Prompt for `slot` of `form`, with the frame's filled slots bound.
pub fn render_slot_prompt(
    config: &ProjectConfig,
    form: &str,
    slot: &str,
    state: &DialogState,
) -> Result<String, NlgError> {
    let unknown = || NlgError::UnknownTemplate(format!("{form}.{slot}"));
    let def = config.form(form).ok_or_else(unknown)?;
    let slot_def = def.slot(slot).ok_or_else(unknown)?;
    let filled = state
        .frames
        .iter()
        .rev()
        .find(|f| f.form == form)
        .map(|f| f.filled.clone())
        .unwrap_or_default();
    let bindings = crate::dialog::frame_bindings(config, form, &filled);
    render(
        config,
        &RenderRequest::new(&slot_def.prompt_template, session_locale(config, state))
            .bindings(bindings)
            .persona(state.persona.clone()),
    )
}

/// Round-robin index for `key`, advancing the session's counter.
pub fn next_rotation(state: &mut DialogState, key: &str, len: usize) -> usize {
    let counter = state.rotation.entry(key.to_string()).or_default();
    let index = if len == 0 { 0 } else { *counter % len };
    *counter += 1;
    index
}
