//! Hierarchical narrative classification with LLM prompting.
//!
//! Documents are classified into a two-level taxonomy in three prompted
//! steps (category, main narratives, sub-narratives) against any
//! [`CompletionBackend`]. Around that sit ensemble aggregation, multi-label
//! scoring, synthetic article generation, and the low-rank adapter algebra
//! used to fine-tune the classifying model.

pub mod backend;
mod concurrency;
pub mod datagen;
pub mod dataset;
pub mod ensemble;
pub mod lora;
pub mod metrics;
pub mod parse;
pub mod pipeline;
pub mod predictions;
pub mod prompt;
pub mod taxonomy;

pub use backend::{
    complete_batch, BackendError, CompletionBackend, CompletionRequest, CompletionResponse,
    HttpBackend, HttpConfig, MockBackend, MockScript,
};
pub use concurrency::bounded_map;
pub use dataset::Document;
pub use ensemble::{aggregate, partition_dataset, Strategy};
pub use metrics::{sample_f1, score, CoarseMode, EvalReport, MetricOptions};
pub use pipeline::{classify_dataset, classify_document, PipelineConfig, PipelineResult};
pub use predictions::PredictionFile;
pub use taxonomy::{load_taxonomy, LabelPair, Taxonomy, OTHER};
