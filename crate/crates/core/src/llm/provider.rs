use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{
    prompt_hash, ChatMessage, GenerationParams, LlmError, MockMode, ProviderConfig, ProviderKind,
    Role,
};

/// Everything a provider needs for one call.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderRequest {
    pub template_id: String,
    pub system: String,
    /// Already clipped to `params.history_window`.
    pub history: Vec<ChatMessage>,
    pub prompt: String,
    pub params: GenerationParams,
}

impl ProviderRequest {
    /// system + history + user prompt.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(self.history.len() + 2);
        out.push(ChatMessage::new(Role::System, self.system.clone()));
        out.extend(self.history.iter().cloned());
        out.push(ChatMessage::new(Role::User, self.prompt.clone()));
        out
    }
}

#[async_trait]
pub trait Provider: Send + Sync {
    fn id(&self) -> String;
    async fn complete(&self, request: &ProviderRequest) -> Result<String, LlmError>;
}

/// One canned response in a fixtures file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub template_id: String,
    pub prompt_hash: String,
    /// Human-readable hint of the prompt; not used for lookup.
    #[serde(default)]
    pub prompt_excerpt: String,
    pub response: String,
}

/// Deterministic provider answering from fixtures keyed by
/// `(template id, prompt hash)`.
#[derive(Debug, Clone)]
pub struct MockProvider {
    fixtures: HashMap<(String, String), String>,
    mode: MockMode,
}

impl MockProvider {
    pub fn new(fixtures: Vec<Fixture>, mode: MockMode) -> Self {
        Self {
            fixtures: fixtures
                .into_iter()
                .map(|f| ((f.template_id, f.prompt_hash), f.response))
                .collect(),
            mode,
        }
    }

    pub fn parse_fixtures(yaml: &str) -> Result<Vec<Fixture>, LlmError> {
        if yaml.trim().is_empty() {
            return Ok(Vec::new());
        }
        serde_yaml::from_str(yaml).map_err(|e| LlmError::FixtureParse(e.to_string()))
    }

    pub fn from_yaml(yaml: &str, mode: MockMode) -> Result<Self, LlmError> {
        Ok(Self::new(Self::parse_fixtures(yaml)?, mode))
    }

    pub fn from_path(path: &Path, mode: MockMode) -> Result<Self, LlmError> {
        let yaml = std::fs::read_to_string(path)
            .map_err(|e| LlmError::FixtureParse(format!("{}: {e}", path.display())))?;
        Self::from_yaml(&yaml, mode)
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    pub fn lookup(&self, template_id: &str, prompt: &str) -> Result<String, LlmError> {
        let hash = prompt_hash(prompt);
        match self.fixtures.get(&(template_id.to_string(), hash.clone())) {
            Some(r) => Ok(r.clone()),
            None => match self.mode {
                MockMode::Strict => Err(LlmError::MissingFixture {
                    template_id: template_id.to_string(),
                    prompt_hash: hash,
                }),
                MockMode::Echo => Ok(format!("[mock:{template_id}:{hash}]")),
            },
        }
    }
}

#[async_trait]
impl Provider for MockProvider {
    fn id(&self) -> String {
        "mock".into()
    }

    async fn complete(&self, request: &ProviderRequest) -> Result<String, LlmError> {
        self.lookup(&request.template_id, &request.prompt)
    }
}

type Responder = dyn Fn(&ProviderRequest) -> Result<String, LlmError> + Send + Sync;

/// Provider backed by a closure; handy for scripted tests and fuzzing the
/// guards with arbitrary model output.
pub struct FnProvider {
    id: String,
    f: Box<Responder>,
}

impl FnProvider {
    pub fn new<F>(id: impl Into<String>, f: F) -> Self
    where
        F: Fn(&ProviderRequest) -> Result<String, LlmError> + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            f: Box::new(f),
        }
    }
}

#[async_trait]
impl Provider for FnProvider {
    fn id(&self) -> String {
        self.id.clone()
    }

    async fn complete(&self, request: &ProviderRequest) -> Result<String, LlmError> {
        (self.f)(request)
    }
}

/// OpenAI-compatible chat-completions client with bounded retries.
pub struct HttpProvider {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    credential_env: String,
    max_retries: u32,
    retry_base: Duration,
}

#[derive(Serialize)]
struct ChatRequestBody<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    frequency_penalty: f64,
    presence_penalty: f64,
}

#[derive(Deserialize)]
struct ChatResponseBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(Result<String, LlmError>),
    Retry(LlmError),
}

impl HttpProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, LlmError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| LlmError::Config("http provider requires an endpoint".into()))?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint,
            model: config.model.clone(),
            credential_env: config.credential_env.clone(),
            max_retries: config.max_retries,
            retry_base: Duration::from_millis(config.retry_base_ms),
        })
    }

    async fn attempt(&self, body: &ChatRequestBody<'_>) -> Attempt {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Ok(key) = std::env::var(&self.credential_env) {
            req = req.bearer_auth(key);
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::ProviderTimeout),
            Err(e) => return Attempt::Done(Err(LlmError::Transport(e.to_string()))),
        };
        let status = resp.status().as_u16();
        if !resp.status().is_success() {
            let body = resp.text().await.unwrap_or_default();
            let err = LlmError::ProviderHttp { status, body };
            return if status == 429 || (500..600).contains(&status) {
                Attempt::Retry(err)
            } else {
                Attempt::Done(Err(err))
            };
        }
        match resp.json::<ChatResponseBody>().await {
            Ok(parsed) => Attempt::Done(
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .and_then(|c| c.message.content)
                    .ok_or_else(|| LlmError::Transport("response has no message content".into())),
            ),
            Err(e) if e.is_timeout() => Attempt::Retry(LlmError::ProviderTimeout),
            Err(e) => Attempt::Done(Err(LlmError::Transport(e.to_string()))),
        }
    }
}

#[async_trait]
impl Provider for HttpProvider {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    async fn complete(&self, request: &ProviderRequest) -> Result<String, LlmError> {
        let body = ChatRequestBody {
            model: &self.model,
            messages: request.messages(),
            temperature: request.params.temperature,
            top_p: request.params.top_p,
            max_tokens: request.params.max_response_tokens,
            frequency_penalty: request.params.frequency_penalty,
            presence_penalty: request.params.presence_penalty,
        };
        let mut attempt = 0;
        loop {
            match self.attempt(&body).await {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) if attempt >= self.max_retries => return Err(err),
                Attempt::Retry(err) => {
                    let delay = self.retry_base * 2u32.saturating_pow(attempt);
                    tracing::debug!(%err, attempt, ?delay, "retrying provider call");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
            }
        }
    }
}

/// Builds the configured provider; relative fixture paths resolve against
/// `base_dir`.
pub fn build_provider(
    config: &ProviderConfig,
    base_dir: &Path,
) -> Result<Arc<dyn Provider>, LlmError> {
    match config.kind {
        ProviderKind::Mock => {
            let mock = match &config.fixtures {
                Some(p) => MockProvider::from_path(&base_dir.join(p), config.mock_mode)?,
                None => MockProvider::new(Vec::new(), config.mock_mode),
            };
            Ok(Arc::new(mock))
        }
        ProviderKind::HttpOpenaiCompatible => Ok(Arc::new(HttpProvider::new(config)?)),
    }
}
