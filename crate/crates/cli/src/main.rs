//! `narrative`: classify, ensemble, score and generate narrative-labelled
//! articles from the command line.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use config::{BackendArgs, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "narrative", version, about = "Hierarchical narrative classification with LLM prompting")]
#[command(after_help = "Exit codes: 0 ok, 2 config, 3 IO/parse, 4 backend, 5 partial failure.")]
struct Cli {
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a JSONL dataset into a prediction TSV.
    Classify(ClassifyArgs),
    /// Combine several prediction files into one.
    Ensemble(EnsembleArgs),
    /// Score a prediction file against a labelled dataset.
    Score(ScoreArgs),
    /// Generate synthetic articles for every sub-narrative.
    Datagen(DatagenArgs),
    /// Check a taxonomy file and print its size.
    ValidateTaxonomy(ValidateArgs),
    /// Split a dataset into k subsets for ensemble training.
    Partition(PartitionArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// JSONL documents: {"id", "text", "language"?, "labels"?}.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Prediction TSV to write.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Write per-step prompts hashes and raw responses as JSONL.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write dropped or unrecognised answer tokens as JSONL.
    #[arg(long)]
    pub run_log: Option<PathBuf>,
    /// Failure manifest path; defaults to `<output>.failures.json`.
    #[arg(long)]
    pub failures: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Prediction files, one per model.
    #[arg(required = true, num_args = 2..)]
    pub inputs: Vec<PathBuf>,
    /// union, majority or intersection.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Aggregate the main-narrative column on its own instead of projecting
    /// the combined pairs.
    #[arg(long)]
    pub coarse_separately: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Labelled JSONL dataset.
    #[arg(long)]
    pub gold: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Text table path; printed to stdout when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Per-document CSV of fine and coarse F1.
    #[arg(long)]
    pub per_document: Option<PathBuf>,
    /// JSON map of language to report.
    #[arg(long)]
    pub by_language: Option<PathBuf>,
    /// F1 assigned when prediction and gold are both empty.
    #[arg(long)]
    pub both_empty: Option<f64>,
    /// macro or samples.
    #[arg(long)]
    pub coarse_mode: Option<String>,
    /// Score main narratives from the file's coarse column rather than
    /// projecting the fine labels.
    #[arg(long)]
    pub coarse_from_column: bool,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Article JSONL to write.
    #[arg(long, short, required_unless_present = "explain_prompt")]
    pub output: Option<PathBuf>,
    /// Accepted articles per sub-narrative.
    #[arg(long)]
    pub target_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the explanation-drafting prompt for the taxonomy and exit.
    #[arg(long)]
    pub explain_prompt: bool,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub path: PathBuf,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Number of subsets.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for `part-<i>.jsonl`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Sample with replacement instead of splitting.
    #[arg(long)]
    pub bootstrap: bool,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Classify(args) => {
            cfg.apply_backend_args(&args.backend);
            override_path(&mut cfg.taxonomy, &args.taxonomy);
            override_path(&mut cfg.dataset, &args.dataset);
            commands::classify(&cfg, &args)
        }
        Command::Ensemble(args) => {
            if let Some(s) = &args.strategy {
                cfg.ensemble.strategy = s.clone();
            }
            commands::ensemble(&cfg, &args)
        }
        Command::Score(args) => {
            if let Some(v) = args.both_empty {
                cfg.metrics.both_empty = v;
            }
            if let Some(v) = &args.coarse_mode {
                cfg.metrics.coarse_mode = v.clone();
            }
            commands::score(&cfg, &args)
        }
        Command::Datagen(args) => {
            cfg.apply_backend_args(&args.backend);
            override_path(&mut cfg.taxonomy, &args.taxonomy);
            if let Some(v) = args.target_count {
                cfg.datagen.target_count = v;
            }
            if let Some(v) = args.seed {
                cfg.seed = v;
            }
            commands::datagen(&cfg, &args)
        }
        Command::ValidateTaxonomy(args) => commands::validate_taxonomy(&args.path),
        Command::Partition(args) => {
            override_path(&mut cfg.dataset, &args.dataset);
            if let Some(v) = args.k {
                cfg.ensemble.k = v;
            }
            if let Some(v) = args.seed {
                cfg.seed = v;
            }
            commands::partition(&cfg, &args)
        }
    }
}

fn override_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
