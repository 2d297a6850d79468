//! Synthetic article generation.
//!
//! Each request asks the model for five articles about one sub-narrative at
//! a temperature drawn from a seeded per-sub-narrative stream. Responses are
//! split on `Article N:` markers and filtered by word count until the target
//! is met or the request cap runs out.

use std::io::{self, Write};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{BackendError, CompletionBackend, CompletionRequest};
use crate::concurrency::bounded_map;
use crate::dataset::Document;
use crate::prompt::{self, PromptError, ARTICLES_PER_PROMPT};
use crate::taxonomy::{LabelPair, SubRef, Taxonomy};

pub use crate::prompt::render_explanation_prompt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticArticle {
    pub category: String,
    pub main: String,
    pub sub: String,
    pub temperature: f64,
    pub text: String,
    pub word_count: usize,
    pub source_request_id: String,
}

impl SyntheticArticle {
    pub fn to_document(&self, id: String) -> Document {
        let gold = LabelPair::new(self.main.as_str(), self.sub.as_str())
            .unwrap_or_else(|_| LabelPair::other());
        Document::new(id, self.text.clone()).with_gold([gold])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatagenConfig {
    pub target_count: usize,
    /// Inclusive temperature range sampled per request.
    pub temperature_range: (f64, f64),
    pub seed: u64,
    /// Inclusive accepted word-count bounds.
    pub word_bounds: (usize, usize),
    /// Requests allowed per sub-narrative; `None` means four times the
    /// minimum needed.
    pub max_requests: Option<usize>,
    pub model: String,
    pub max_tokens: u32,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig {
            target_count: 100,
            temperature_range: (1.0, 1.5),
            seed: 42,
            word_bounds: (200, 800),
            max_requests: None,
            model: "default".to_string(),
            max_tokens: 4096,
        }
    }
}

impl DatagenConfig {
    pub fn min_requests(&self) -> usize {
        self.target_count.div_ceil(ARTICLES_PER_PROMPT)
    }

    pub fn request_cap(&self) -> usize {
        self.max_requests.unwrap_or(4 * self.min_requests())
    }

    fn validate(&self) -> Result<(), DatagenError> {
        let (lo, hi) = self.temperature_range;
        if !(0.0..=2.0).contains(&lo) || !(0.0..=2.0).contains(&hi) || lo > hi {
            return Err(DatagenError::Config(format!("temperature range [{lo}, {hi}] invalid")));
        }
        if self.target_count == 0 {
            return Err(DatagenError::Config("target_count must be >= 1".into()));
        }
        if self.word_bounds.0 > self.word_bounds.1 {
            return Err(DatagenError::Config("word bounds reversed".into()));
        }
        if self.request_cap() == 0 {
            return Err(DatagenError::Config("request cap must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatagenError {
    #[error("datagen config: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("backend failed for {sub:?}: {error}")]
    Backend { sub: String, error: BackendError },
}

/// What to generate for: one sub-narrative with its ancestry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationTarget {
    pub category: String,
    pub main: String,
    pub sub: String,
    pub explanation: String,
}

impl From<SubRef<'_>> for GenerationTarget {
    fn from(s: SubRef<'_>) -> Self {
        GenerationTarget {
            category: s.category.to_string(),
            main: s.main.to_string(),
            sub: s.sub.name.clone(),
            explanation: s.sub.explanation.clone(),
        }
    }
}

impl GenerationTarget {
    fn digest(&self, seed: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        for part in [&self.category, &self.main, &self.sub] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        h.finalize().into()
    }

    /// Seed of this target's temperature stream; independent of scheduling.
    pub fn stream_seed(&self, seed: u64) -> u64 {
        let d = self.digest(seed);
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    fn request_id(&self, index: usize) -> String {
        format!("{}-{index:04}", &hex::encode(self.digest(0))[..12])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub target: GenerationTarget,
    pub articles: Vec<SyntheticArticle>,
    pub requests: usize,
    /// Articles split out of responses but outside the word bounds.
    pub rejected: usize,
    pub reached_target: bool,
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^[ \t]*article[ \t]+\d+[ \t]*:").unwrap())
}

/// Split a response on line-anchored `Article N:` markers. Text before the
/// first marker is dropped; bodies are trimmed and kept in document order.
pub fn split_articles(raw: &str) -> Vec<String> {
    let starts: Vec<(usize, usize)> = marker().find_iter(raw).map(|m| (m.start(), m.end())).collect();
    starts
        .iter()
        .enumerate()
        .map(|(i, &(_, body_start))| {
            let end = starts.get(i + 1).map_or(raw.len(), |next| next.0);
            raw[body_start..end].trim().to_string()
        })
        .collect()
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Generate articles for one sub-narrative. Stops at `target_count`
/// accepted articles or at the request cap, whichever comes first.
pub fn generate_for_subnarrative<B: CompletionBackend + ?Sized>(
    target: &GenerationTarget,
    backend: &B,
    config: &DatagenConfig,
) -> Result<GenerationOutcome, DatagenError> {
    config.validate()?;
    let prompt = prompt::render_datagen(&target.category, &target.sub, &target.explanation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(target.stream_seed(config.seed));
    let (lo, hi) = config.temperature_range;
    let (min_words, max_words) = config.word_bounds;
    let cap = config.request_cap();

    let mut articles = Vec::with_capacity(config.target_count);
    let mut rejected = 0;
    let mut requests = 0;
    while articles.len() < config.target_count && requests < cap {
        let temperature = rng.random_range(lo..=hi);
        let request_id = target.request_id(requests);
        requests += 1;
        let request = CompletionRequest {
            prompt: prompt.clone(),
            temperature,
            max_tokens: config.max_tokens,
            model: config.model.clone(),
        };
        let response = backend.complete(&request).map_err(|error| DatagenError::Backend {
            sub: target.sub.clone(),
            error,
        })?;
        for body in split_articles(&response.text) {
            let words = word_count(&body);
            if !(min_words..=max_words).contains(&words) {
                rejected += 1;
                continue;
            }
            if articles.len() == config.target_count {
                break;
            }
            articles.push(SyntheticArticle {
                category: target.category.clone(),
                main: target.main.clone(),
                sub: target.sub.clone(),
                temperature,
                text: body,
                word_count: words,
                source_request_id: request_id.clone(),
            });
        }
    }
    let reached_target = articles.len() == config.target_count;
    if !reached_target {
        tracing::warn!(
            sub = %target.sub,
            accepted = articles.len(),
            target = config.target_count,
            requests,
            "request cap reached before target"
        );
    }
    Ok(GenerationOutcome {
        target: target.clone(),
        articles,
        requests,
        rejected,
        reached_target,
    })
}

/// Generation over every sub-narrative of a taxonomy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatagenRun {
    /// One outcome per sub-narrative that completed, in taxonomy order.
    pub outcomes: Vec<GenerationOutcome>,
    pub failures: Vec<DatagenError>,
}

impl DatagenRun {
    pub fn articles(&self) -> impl Iterator<Item = &SyntheticArticle> {
        self.outcomes.iter().flat_map(|o| o.articles.iter())
    }

    pub fn total_requests(&self) -> usize {
        self.outcomes.iter().map(|o| o.requests).sum()
    }

    pub fn total_articles(&self) -> usize {
        self.outcomes.iter().map(|o| o.articles.len()).sum()
    }

    /// Accepted articles per request issued.
    pub fn yield_per_request(&self) -> f64 {
        match self.total_requests() {
            0 => 0.0,
            n => self.total_articles() as f64 / n as f64,
        }
    }
}

/// Run [`generate_for_subnarrative`] for all sub-narratives with up to
/// `parallelism` of them in flight.
pub fn generate_all<B: CompletionBackend + ?Sized>(
    taxonomy: &Taxonomy,
    backend: &B,
    config: &DatagenConfig,
    parallelism: usize,
) -> Result<DatagenRun, DatagenError> {
    config.validate()?;
    let targets: Vec<GenerationTarget> = taxonomy.subnarratives().map(Into::into).collect();
    let outcomes = bounded_map(&targets, parallelism, |_, t| {
        generate_for_subnarrative(t, backend, config)
    });
    let mut run = DatagenRun::default();
    for outcome in outcomes {
        match outcome {
            Ok(o) => run.outcomes.push(o),
            Err(e) => run.failures.push(e),
        }
    }
    Ok(run)
}

pub fn write_articles<'a, W: Write>(
    mut out: W,
    articles: impl IntoIterator<Item = &'a SyntheticArticle>,
) -> io::Result<()> {
    for a in articles {
        serde_json::to_writer(&mut out, a)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Explanation-drafting prompt covering every narrative in `taxonomy`.
pub fn explanation_prompt_for(taxonomy: &Taxonomy) -> Result<String, PromptError> {
    let mains: Vec<&str> = taxonomy
        .categories()
        .iter()
        .flat_map(|c| c.narratives.iter().map(|m| m.name.as_str()))
        .collect();
    let subs: Vec<&str> = taxonomy.subnarratives().map(|s| s.sub.name.as_str()).collect();
    render_explanation_prompt(&mains, &subs)
}
