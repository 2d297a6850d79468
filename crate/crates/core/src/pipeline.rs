//! Three-step hierarchical classification of a document.
//!
//! Step 1 picks the category, step 2 the main narratives of that category,
//! and step 3 runs once per main narrative with only that narrative's
//! sub-narratives in the prompt. Either of the first two steps can end the
//! run with the sentinel pair.

use std::collections::BTreeSet;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{BackendError, CompletionBackend, CompletionRequest, DEFAULT_MAX_TOKENS};
use crate::concurrency::bounded_map;
use crate::dataset::Document;
use crate::parse::{parse_category, parse_hash_list_in, CategoryDecision};
use crate::prompt::{self, PromptError};
use crate::taxonomy::{LabelPair, Level, Taxonomy, OTHER};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            model: "default".to_string(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "step", rename_all = "lowercase")]
pub enum Step {
    Step1,
    Step2,
    Step3 { main: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    #[serde(flatten)]
    pub step: Step,
    pub prompt_sha256: String,
    pub response: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    UnparsedCategory,
    UnknownLabel,
}

/// One dropped or unrecognised token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogRecord {
    pub document_id: String,
    pub level: Level,
    pub kind: WarningKind,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineResult {
    pub document_id: String,
    /// Category name or `"Other"`.
    pub category: String,
    pub labels: BTreeSet<LabelPair>,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<LogRecord>,
}

impl PipelineResult {
    pub fn is_other(&self) -> bool {
        self.category == OTHER
    }

    /// Distinct main narratives in `labels`.
    pub fn mains(&self) -> BTreeSet<&str> {
        self.labels.iter().map(|p| p.main()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("document {document_id:?} failed: {message}")]
pub struct DocumentFailure {
    pub index: usize,
    pub document_id: String,
    pub message: String,
    #[serde(skip)]
    pub error: PipelineError,
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

struct Run<'a, B: ?Sized> {
    doc: &'a Document,
    backend: &'a B,
    config: &'a PipelineConfig,
    trace: Vec<TraceEntry>,
    warnings: Vec<LogRecord>,
}

impl<B: CompletionBackend + ?Sized> Run<'_, B> {
    fn call(&mut self, step: Step, prompt: String) -> Result<String, PipelineError> {
        let request = CompletionRequest {
            prompt,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            model: self.config.model.clone(),
        };
        let response = self.backend.complete(&request)?;
        self.trace.push(TraceEntry {
            step,
            prompt_sha256: prompt_hash(&request.prompt),
            response: response.text.clone(),
        });
        Ok(response.text)
    }

    fn warn(&mut self, level: Level, kind: WarningKind, token: &str) {
        self.warnings.push(LogRecord {
            document_id: self.doc.id.clone(),
            level,
            kind,
            token: token.to_string(),
        });
    }

    fn finish(self, category: &str, labels: BTreeSet<LabelPair>) -> PipelineResult {
        PipelineResult {
            document_id: self.doc.id.clone(),
            category: category.to_string(),
            labels,
            trace: self.trace,
            warnings: self.warnings,
        }
    }
}

fn sentinel() -> BTreeSet<LabelPair> {
    BTreeSet::from([LabelPair::other()])
}

fn classify_inner<B: CompletionBackend + ?Sized>(
    doc: &Document,
    taxonomy: &Taxonomy,
    backend: &B,
    config: &PipelineConfig,
) -> Result<PipelineResult, PipelineError> {
    let mut run = Run {
        doc,
        backend,
        config,
        trace: Vec::new(),
        warnings: Vec::new(),
    };
    let text = doc.text.as_str();

    let raw = run.call(Step::Step1, prompt::render_step1(text)?)?;
    let parsed = parse_category(&raw, taxonomy);
    if let Some(unparsed) = &parsed.unparsed {
        run.warn(Level::Category, WarningKind::UnparsedCategory, unparsed);
    }
    let category = match parsed.decision {
        CategoryDecision::Category(name) => taxonomy
            .category(&name)
            .expect("parse_category returns taxonomy names"),
        CategoryDecision::Other => return Ok(run.finish(OTHER, sentinel())),
    };

    let narratives: Vec<(&str, &str)> = category
        .narratives
        .iter()
        .map(|m| (m.name.as_str(), m.explanation.as_str()))
        .collect();
    let raw = run.call(
        Step::Step2,
        prompt::render_step2(&category.name, &narratives, text)?,
    )?;
    let mains = parse_hash_list_in(
        &raw,
        Level::Main,
        taxonomy,
        Some(&category.name),
        Some(&category.name),
    );
    for token in &mains.unknown {
        run.warn(Level::Main, WarningKind::UnknownLabel, token);
    }
    if mains.other {
        return Ok(run.finish(&category.name, sentinel()));
    }

    let mut labels = BTreeSet::new();
    for main_name in &mains.labels {
        let main = taxonomy
            .main(&category.name, main_name)
            .expect("resolved main narrative exists");
        let children: Vec<(&str, &str)> = main
            .subnarratives
            .iter()
            .map(|s| (s.name.as_str(), s.explanation.as_str()))
            .collect();
        let raw = run.call(
            Step::Step3 { main: main.name.clone() },
            prompt::render_step3(&category.name, &main.name, &children, text)?,
        )?;
        let subs = parse_hash_list_in(
            &raw,
            Level::Sub,
            taxonomy,
            Some(&category.name),
            Some(&main.name),
        );
        for token in &subs.unknown {
            run.warn(Level::Sub, WarningKind::UnknownLabel, token);
        }
        for sub in &subs.labels {
            labels.insert(LabelPair::new(main.name.as_str(), sub.as_str()).expect("main is not the sentinel"));
        }
        if subs.other || !subs.unknown.is_empty() {
            labels.insert(LabelPair::main_only(main.name.as_str()));
        }
    }
    Ok(run.finish(&category.name, labels))
}

/// Classify one document. Backend failures surface as a [`DocumentFailure`]
/// after the backend's own retries.
pub fn classify_document<B: CompletionBackend + ?Sized>(
    doc: &Document,
    taxonomy: &Taxonomy,
    backend: &B,
    config: &PipelineConfig,
) -> Result<PipelineResult, DocumentFailure> {
    classify_inner(doc, taxonomy, backend, config).map_err(|error| DocumentFailure {
        index: 0,
        document_id: doc.id.clone(),
        message: error.to_string(),
        error,
    })
}

/// Results of classifying a dataset. Both lists follow input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DatasetRun {
    pub results: Vec<PipelineResult>,
    pub failures: Vec<DocumentFailure>,
}

impl DatasetRun {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// All warning records, in document order.
    pub fn run_log(&self) -> impl Iterator<Item = &LogRecord> {
        self.results.iter().flat_map(|r| r.warnings.iter())
    }
}

/// Classify `docs` with up to `parallelism` documents in flight. Steps within
/// a document stay sequential.
///
/// # Panics
///
/// If `parallelism` is zero.
pub fn classify_dataset<B: CompletionBackend + ?Sized>(
    docs: &[Document],
    taxonomy: &Taxonomy,
    backend: &B,
    config: &PipelineConfig,
    parallelism: usize,
) -> DatasetRun {
    let outcomes = bounded_map(docs, parallelism, |index, doc| {
        classify_document(doc, taxonomy, backend, config).map_err(|f| DocumentFailure { index, ..f })
    });
    let mut run = DatasetRun::default();
    for outcome in outcomes {
        match outcome {
            Ok(r) => run.results.push(r),
            Err(f) => run.failures.push(f),
        }
    }
    run
}
