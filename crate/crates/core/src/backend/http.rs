use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::retry::{classify_status, AttemptError, RetryPolicy, StatusClass};
use super::{BackendError, CompletionBackend, CompletionRequest, CompletionResponse, Usage};

/// Default environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";
/// Environment variable that overrides the configured endpoint.
pub const ENDPOINT_ENV: &str = "NARRATIVE_ENDPOINT";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`. `/chat/completions` is appended.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    /// Optional system message sent ahead of the user prompt.
    pub system_message: Option<String>,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
            system_message: None,
        }
    }
}

pub struct HttpBackend {
    url: String,
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        let url = format!("{}/chat/completions", config.endpoint.trim_end_matches('/'));
        Ok(HttpBackend { url, config, client })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn body<'a>(&'a self, request: &'a CompletionRequest) -> ChatRequest<'a> {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &self.config.system_message {
            messages.push(ChatMessage { role: "system", content: system });
        }
        messages.push(ChatMessage { role: "user", content: &request.prompt });
        ChatRequest {
            model: &request.model,
            messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        }
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Result<(String, Option<Usage>), AttemptError> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| AttemptError::Transient(format!("transport: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| AttemptError::Transient(format!("reading body: {e}")))?;
        match classify_status(status) {
            StatusClass::Success => parse_body(&text).map_err(AttemptError::Fatal),
            StatusClass::Auth => Err(AttemptError::Fatal(BackendError::Auth { status })),
            StatusClass::Client => Err(AttemptError::Fatal(BackendError::Client {
                status,
                body: truncate(&text, 512),
            })),
            StatusClass::Retryable => Err(AttemptError::Transient(format!(
                "HTTP {status}: {}",
                truncate(&text, 200)
            ))),
        }
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((idx, _)) => format!("{}...", &s[..idx]),
        None => s.to_string(),
    }
}

fn parse_body(text: &str) -> Result<(String, Option<Usage>), BackendError> {
    let parsed: ChatResponse =
        serde_json::from_str(text).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    let content = parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::MalformedResponse("no choices[0].message.content".into()))?;
    Ok((content, parsed.usage))
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        request.validate()?;
        let body = self.body(request);
        let started = Instant::now();
        let (text, usage) = self.config.retry.run(|_| self.attempt(&body))?;
        Ok(CompletionResponse {
            text,
            usage,
            latency: started.elapsed(),
        })
    }
}
