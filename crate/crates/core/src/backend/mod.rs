//! LLM completion backends.
//!
//! [`CompletionBackend`] is the one seam between the pipeline and a model.
//! [`MockBackend`] answers from a script; [`HttpBackend`] speaks the
//! OpenAI-compatible chat-completions protocol.

mod http;
mod mock;
mod retry;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, API_KEY_ENV, ENDPOINT_ENV};
pub use mock::{CallRecord, MockBackend, MockReply, MockRule, MockScript};
pub use retry::{classify_status, RetryPolicy, StatusClass};

use crate::concurrency::bounded_map;

/// Default completion budget for classification calls.
pub const DEFAULT_MAX_TOKENS: u32 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model: String,
}

impl CompletionRequest {
    /// Classification defaults: temperature 0, 256 tokens.
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            model: model.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResponse {
    pub text: String,
    pub usage: Option<Usage>,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },
    #[error("request rejected (HTTP {status}): {body}")]
    Client { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed response body: {0}")]
    MalformedResponse(String),
    #[error("scripted failure: {0}")]
    Scripted(String),
}

/// A model that turns a prompt into text. Implementations are shared across
/// worker threads.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}

/// Run `requests` with at most `parallelism` in flight. Results line up with
/// `requests` index for index; one failure does not abort the rest.
///
/// # Panics
///
/// If `parallelism` is zero.
pub fn complete_batch<B: CompletionBackend + ?Sized>(
    backend: &B,
    requests: &[CompletionRequest],
    parallelism: usize,
) -> Vec<Result<CompletionResponse, BackendError>> {
    bounded_map(requests, parallelism, |_, req| backend.complete(req))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn script() -> MockScript {
        MockScript::new(MockReply::Response("default".into()))
            .rule(["classify it into one of the two categories"], MockReply::Response("Climate Change".into()))
            .rule(["FAIL"], MockReply::Error("boom".into()))
    }

    #[test]
    fn request_validation() {
        assert!(CompletionRequest::new("m", "p").with_temperature(2.5).validate().is_err());
        assert!(CompletionRequest::new("m", "p").with_max_tokens(0).validate().is_err());
        assert!(CompletionRequest::new("m", "p").with_temperature(1.5).validate().is_ok());
    }

    #[test]
    fn batch_is_ordered_and_positional() {
        let mock = MockBackend::new(script());
        let reqs: Vec<_> = (0..100)
            .map(|i| {
                let p = if i == 37 { "FAIL".to_string() } else { format!("echo {i}") };
                CompletionRequest::new("m", p)
            })
            .collect();
        let out = complete_batch(&mock, &reqs, 8);
        assert_eq!(out.len(), 100);
        assert_eq!(out.iter().filter(|r| r.is_ok()).count(), 99);
        assert!(matches!(out[37], Err(BackendError::Scripted(_))));
        assert_eq!(mock.calls().len(), 100);
    }

    #[test]
    fn batch_sequential_with_parallelism_one() {
        let mock = MockBackend::new(script());
        let reqs: Vec<_> = ["a", "b", "c"].iter().map(|p| CompletionRequest::new("m", *p)).collect();
        complete_batch(&mock, &reqs, 1);
        let prompts: Vec<_> = mock.calls().into_iter().map(|c| c.prompt).collect();
        assert_eq!(prompts, ["a", "b", "c"]);
    }

    #[test]
    fn batch_respects_parallelism_bound() {
        let mock = Arc::new(MockBackend::new(script()).with_delay(Duration::from_millis(5)));
        let reqs: Vec<_> = (0..24).map(|i| CompletionRequest::new("m", format!("{i}"))).collect();
        complete_batch(&mock, &reqs, 3);
        assert!(mock.max_in_flight() <= 3, "saw {}", mock.max_in_flight());
        assert!(mock.max_in_flight() >= 2);
    }
}
