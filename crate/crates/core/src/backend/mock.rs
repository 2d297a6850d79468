use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionBackend, CompletionRequest, CompletionResponse};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockReply {
    Response(String),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum Needles {
    One(String),
    Many(Vec<String>),
}

/// Matches when every substring in `contains` occurs in the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawRule", into = "RawRule")]
pub struct MockRule {
    pub contains: Vec<String>,
    pub reply: MockReply,
}

#[derive(Serialize, Deserialize)]
struct RawRule {
    contains: Needles,
    #[serde(flatten)]
    reply: MockReply,
}

impl From<RawRule> for MockRule {
    fn from(raw: RawRule) -> Self {
        let contains = match raw.contains {
            Needles::One(s) => vec![s],
            Needles::Many(v) => v,
        };
        MockRule { contains, reply: raw.reply }
    }
}

impl From<MockRule> for RawRule {
    fn from(rule: MockRule) -> Self {
        RawRule {
            contains: Needles::Many(rule.contains),
            reply: rule.reply,
        }
    }
}

impl MockRule {
    fn matches(&self, prompt: &str) -> bool {
        self.contains.iter().all(|n| prompt.contains(n.as_str()))
    }
}

fn default_reply() -> MockReply {
    MockReply::Response(crate::taxonomy::OTHER.to_string())
}

/// Ordered rules; the first match wins, otherwise `default`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default = "default_reply")]
    pub default: MockReply,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript::new(default_reply())
    }
}

impl MockScript {
    pub fn new(default: MockReply) -> Self {
        MockScript { rules: Vec::new(), default }
    }

    pub fn rule<I, S>(mut self, contains: I, reply: MockReply) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.rules.push(MockRule {
            contains: contains.into_iter().map(Into::into).collect(),
            reply,
        });
        self
    }

    pub fn respond<I, S>(self, contains: I, text: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.rule(contains, MockReply::Response(text.into()))
    }

    pub fn reply_for(&self, prompt: &str) -> &MockReply {
        self.rules
            .iter()
            .find(|r| r.matches(prompt))
            .map_or(&self.default, |r| &r.reply)
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("mock script {}: {e}", path.display())))?;
        Self::from_json_str(&text)
            .map_err(|e| BackendError::Config(format!("mock script {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub reply: MockReply,
}

/// Scripted backend. Every call is appended to a synchronized log.
#[derive(Debug, Default)]
pub struct MockBackend {
    script: MockScript,
    delay: Option<Duration>,
    calls: Mutex<Vec<CallRecord>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            ..Default::default()
        }
    }

    /// Sleep this long inside every call; used to observe concurrency.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    /// Calls in arrival order.
    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.lock().unwrap().clear();
        self.max_in_flight.store(0, Ordering::SeqCst);
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        request.validate()?;
        let started = Instant::now();
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        let reply = self.script.reply_for(&request.prompt).clone();
        self.calls.lock().unwrap().push(CallRecord {
            prompt: request.prompt.clone(),
            model: request.model.clone(),
            temperature: request.temperature,
            reply: reply.clone(),
        });
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        match reply {
            MockReply::Response(text) => Ok(CompletionResponse {
                text,
                usage: None,
                latency: started.elapsed(),
            }),
            MockReply::Error(msg) => Err(BackendError::Scripted(msg)),
        }
    }
}
