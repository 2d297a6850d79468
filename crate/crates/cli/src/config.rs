//! Run configuration: a TOML file, environment overrides for secrets and the
//! endpoint, then command-line flags on top.

use std::path::{Path, PathBuf};
use std::time::Duration;

use narrative_core::backend::{RetryPolicy, API_KEY_ENV, ENDPOINT_ENV};
use narrative_core::datagen::DatagenConfig;
use narrative_core::{
    CoarseMode, CompletionBackend, HttpBackend, HttpConfig, MetricOptions, MockBackend, MockScript,
    PipelineConfig, Strategy,
};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    /// Mock rules file, for `kind = "mock"`.
    pub script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub parallelism: usize,
    pub max_attempts: u32,
    pub timeout_secs: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub system_message: Option<String>,
}

impl Default for BackendSettings {
    fn default() -> Self {
        BackendSettings {
            kind: BackendKind::Mock,
            script: None,
            endpoint: None,
            model: "default".into(),
            api_key_env: API_KEY_ENV.into(),
            parallelism: 4,
            max_attempts: 3,
            timeout_secs: 60,
            temperature: 0.0,
            max_tokens: narrative_core::backend::DEFAULT_MAX_TOKENS,
            system_message: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub k: usize,
    pub strategy: String,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings { k: 3, strategy: "union".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub both_empty: f64,
    pub coarse_mode: String,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings { both_empty: 1.0, coarse_mode: "macro".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenSettings {
    pub target_count: usize,
    pub temperature_min: f64,
    pub temperature_max: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub max_requests: Option<usize>,
    pub max_tokens: u32,
}

impl Default for DatagenSettings {
    fn default() -> Self {
        let d = DatagenConfig::default();
        DatagenSettings {
            target_count: d.target_count,
            temperature_min: d.temperature_range.0,
            temperature_max: d.temperature_range.1,
            min_words: d.word_bounds.0,
            max_words: d.word_bounds.1,
            max_requests: d.max_requests,
            max_tokens: d.max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub taxonomy: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub backend: BackendSettings,
    pub ensemble: EnsembleSettings,
    pub metrics: MetricSettings,
    pub datagen: DatagenSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            taxonomy: None,
            dataset: None,
            backend: BackendSettings::default(),
            ensemble: EnsembleSettings::default(),
            metrics: MetricSettings::default(),
            datagen: DatagenSettings::default(),
        }
    }
}

/// Backend flags shared by the commands that call a model.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct BackendArgs {
    /// Backend implementation.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Mock rules file (JSON).
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible API, e.g. http://localhost:8000/v1.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Maximum documents (or sub-narratives) in flight.
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Apply environment overrides, then flags.
    pub fn apply_backend_args(&mut self, args: &BackendArgs) {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.is_empty() {
                self.backend.endpoint = Some(endpoint);
            }
        }
        let b = &mut self.backend;
        if let Some(v) = args.backend {
            b.kind = v;
        }
        if let Some(v) = &args.script {
            b.script = Some(v.clone());
        }
        if let Some(v) = &args.endpoint {
            b.endpoint = Some(v.clone());
        }
        if let Some(v) = &args.model {
            b.model = v.clone();
        }
        if let Some(v) = args.parallelism {
            b.parallelism = v;
        }
        if let Some(v) = args.max_attempts {
            b.max_attempts = v;
        }
        if let Some(v) = args.timeout_secs {
            b.timeout_secs = v;
        }
    }

    pub fn taxonomy_path(&self) -> Result<&Path, CliError> {
        existing(self.taxonomy.as_deref(), "taxonomy")
    }

    pub fn dataset_path(&self) -> Result<&Path, CliError> {
        existing(self.dataset.as_deref(), "dataset")
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            model: self.backend.model.clone(),
            temperature: self.backend.temperature,
            max_tokens: self.backend.max_tokens,
        }
    }

    pub fn parallelism(&self) -> Result<usize, CliError> {
        match self.backend.parallelism {
            0 => Err(CliError::Config("parallelism must be >= 1".into())),
            n => Ok(n),
        }
    }

    pub fn strategy(&self) -> Result<Strategy, CliError> {
        self.ensemble.strategy.parse().map_err(CliError::Config)
    }

    pub fn metric_options(&self) -> Result<MetricOptions, CliError> {
        let coarse_mode: CoarseMode = self.metrics.coarse_mode.parse().map_err(CliError::Config)?;
        Ok(MetricOptions {
            both_empty: self.metrics.both_empty,
            coarse_mode,
            macro_labels: Vec::new(),
        })
    }

    pub fn datagen(&self) -> DatagenConfig {
        let d = &self.datagen;
        DatagenConfig {
            target_count: d.target_count,
            temperature_range: (d.temperature_min, d.temperature_max),
            seed: self.seed,
            word_bounds: (d.min_words, d.max_words),
            max_requests: d.max_requests,
            model: self.backend.model.clone(),
            max_tokens: d.max_tokens,
        }
    }

    pub fn build_backend(&self) -> Result<Box<dyn CompletionBackend>, CliError> {
        let b = &self.backend;
        match b.kind {
            BackendKind::Mock => {
                let script = match &b.script {
                    Some(path) => {
                        let path = existing(Some(path), "mock script")?;
                        MockScript::load(path).map_err(|e| CliError::Config(e.to_string()))?
                    }
                    None => MockScript::default(),
                };
                Ok(Box::new(MockBackend::new(script)))
            }
            BackendKind::Http => {
                let endpoint = b
                    .endpoint
                    .clone()
                    .ok_or_else(|| CliError::Config(format!("http backend needs an endpoint (flag, config, or {ENDPOINT_ENV})")))?;
                let mut cfg = HttpConfig::new(endpoint);
                cfg.api_key = std::env::var(&b.api_key_env).ok().filter(|k| !k.is_empty());
                cfg.timeout = Duration::from_secs(b.timeout_secs);
                cfg.retry = RetryPolicy { max_attempts: b.max_attempts, ..RetryPolicy::default() };
                cfg.system_message = b.system_message.clone();
                let backend = HttpBackend::new(cfg).map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Box::new(backend))
            }
        }
    }
}

fn existing<'a>(path: Option<&'a Path>, what: &str) -> Result<&'a Path, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("no {what} path given")))?;
    if !path.exists() {
        return Err(CliError::Config(format!("{what} {} does not exist", path.display())));
    }
    Ok(path)
}
