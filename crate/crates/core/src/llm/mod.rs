//! Single chokepoint for every LLM call: prompt registry, generation
//! parameters, provider abstraction and the append-only exchange log.

mod audit;
pub mod parse;
mod prompts;
mod provider;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

use crate::template::{self, TemplateError};
use crate::text;

pub use audit::{parse_line, read_log, AuditLog, LLMExchange};
pub use prompts::{builtin_prompts, PromptRegistry};
pub use provider::{
    build_provider, Fixture, FnProvider, HttpProvider, MockProvider, Provider, ProviderRequest,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_response_tokens: u32,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    /// Number of past conversation messages sent along with a prompt.
    pub history_window: usize,
}

impl Default for GenerationParams {
    /// The playground defaults the banking experiments ran with.
    fn default() -> Self {
        Self {
            temperature: 0.7,
            top_p: 0.95,
            max_response_tokens: 800,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            history_window: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamsOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_response_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub presence_penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history_window: Option<usize>,
}

impl GenerationParams {
    pub fn apply(mut self, o: &ParamsOverride) -> Self {
        if let Some(v) = o.temperature {
            self.temperature = v;
        }
        if let Some(v) = o.top_p {
            self.top_p = v;
        }
        if let Some(v) = o.max_response_tokens {
            self.max_response_tokens = v;
        }
        if let Some(v) = o.frequency_penalty {
            self.frequency_penalty = v;
        }
        if let Some(v) = o.presence_penalty {
            self.presence_penalty = v;
        }
        if let Some(v) = o.history_window {
            self.history_window = v;
        }
        self
    }
}

/// Shape of output a prompt is expected to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    #[default]
    FreeText,
    NumberedList,
    LabeledSummary,
    VerbatimChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_override: Option<ParamsOverride>,
    #[serde(default)]
    pub expects: Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    HttpOpenaiCompatible,
    #[default]
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// Unknown prompts are an error.
    #[default]
    Strict,
    /// Unknown prompts return a marker naming the template and hash.
    Echo,
}

/// Provider settings. Holds only the *name* of the credential variable,
/// never the credential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model: String,
    pub credential_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub retry_base_ms: u64,
    /// Relative paths resolve against the project directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<PathBuf>,
    pub mock_mode: MockMode,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: None,
            model: "gpt-4".into(),
            credential_env: "LLM_API_KEY".into(),
            timeout_ms: 30_000,
            max_retries: 2,
            retry_base_ms: 500,
            fixtures: None,
            mock_mode: MockMode::Strict,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("provider timed out")]
    ProviderTimeout,
    #[error("provider returned HTTP {status}: {body}")]
    ProviderHttp { status: u16, body: String },
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("no fixture for template {template_id:?} with prompt hash {prompt_hash}")]
    MissingFixture {
        template_id: String,
        prompt_hash: String,
    },
    #[error("fixture file error: {0}")]
    FixtureParse(String),
    #[error("unknown prompt template {0:?}")]
    TemplateUnknown(String),
    #[error("missing binding {{{0}}} for prompt")]
    MissingBinding(String),
    #[error("prompt template syntax: {0}")]
    TemplateSyntax(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

impl From<TemplateError> for LlmError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::MissingBinding(n) => LlmError::MissingBinding(n),
            other => LlmError::TemplateSyntax(other.to_string()),
        }
    }
}

/// Stable content hash of a rendered prompt: SHA-256 over the
/// whitespace-collapsed text, first 16 hex digits.
pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(text::collapse_whitespace(prompt).as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub exchange_id: Uuid,
}

pub struct Gateway {
    registry: PromptRegistry,
    provider: Arc<dyn Provider>,
    audit: Arc<AuditLog>,
    defaults: GenerationParams,
    system_message: String,
}

impl Gateway {
    pub fn new(
        registry: PromptRegistry,
        provider: Arc<dyn Provider>,
        audit: Arc<AuditLog>,
    ) -> Self {
        Self {
            registry,
            provider,
            audit,
            defaults: GenerationParams::default(),
            system_message: "You are a helpful client advisor in private banking.".into(),
        }
    }

    pub fn with_system_message(mut self, message: impl Into<String>) -> Self {
        self.system_message = message.into();
        self
    }

    pub fn registry(&self) -> &PromptRegistry {
        &self.registry
    }

    pub fn audit(&self) -> &Arc<AuditLog> {
        &self.audit
    }

    pub fn provider_id(&self) -> String {
        self.provider.id()
    }

    /// Renders the prompt, calls the provider with the effective parameters
    /// and logs exactly one exchange whatever the outcome.
    pub async fn complete(
        &self,
        template_id: &str,
        bindings: &BTreeMap<String, String>,
        context: &[ChatMessage],
        params_override: Option<&ParamsOverride>,
    ) -> Result<Completion, LlmError> {
        let started = Instant::now();
        let (request, result) = match self.prepare(template_id, bindings, context, params_override)
        {
            Ok(request) => {
                let result = self
                    .provider
                    .complete(&request)
                    .await
                    .map(|t| t.trim_end().to_string());
                (request, result)
            }
            Err(e) => (
                ProviderRequest {
                    template_id: template_id.to_string(),
                    system: self.system_message.clone(),
                    history: Vec::new(),
                    prompt: String::new(),
                    params: self.defaults.clone(),
                },
                Err(e),
            ),
        };
        let exchange = LLMExchange {
            id: Uuid::new_v4(),
            template_id: request.template_id,
            prompt_hash: prompt_hash(&request.prompt),
            prompt: request.prompt,
            context: request.history,
            params: request.params,
            provider: self.provider.id(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
            latency_ms: started.elapsed().as_millis() as u64,
            timestamp: chrono::Utc::now(),
        };
        let exchange_id = exchange.id;
        if let Err(e) = self.audit.append(exchange) {
            tracing::warn!(error = %e, "failed to persist LLM exchange");
        }
        result.map(|text| Completion { text, exchange_id })
    }

    fn prepare(
        &self,
        template_id: &str,
        bindings: &BTreeMap<String, String>,
        context: &[ChatMessage],
        params_override: Option<&ParamsOverride>,
    ) -> Result<ProviderRequest, LlmError> {
        let template = self
            .registry
            .get(template_id)
            .ok_or_else(|| LlmError::TemplateUnknown(template_id.to_string()))?;
        let prompt = template::render(&template.body, bindings)?;
        let mut params = self.defaults.clone();
        if let Some(o) = &template.params_override {
            params = params.apply(o);
        }
        if let Some(o) = params_override {
            params = params.apply(o);
        }
        let history = context
            .iter()
            .skip(context.len().saturating_sub(params.history_window))
            .cloned()
            .collect();
        Ok(ProviderRequest {
            template_id: template_id.to_string(),
            system: self.system_message.clone(),
            history,
            prompt,
            params,
        })
    }
}
