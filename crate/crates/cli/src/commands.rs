use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use narrative_core::datagen::{explanation_prompt_for, generate_all, write_articles};
use narrative_core::dataset::{read_documents, write_documents};
use narrative_core::ensemble::{aggregate_coarse, bootstrap_dataset, EnsembleError};
use narrative_core::metrics::{score_by_language, score_with_coarse, MetricsError};
use narrative_core::pipeline::{DocumentFailure, TraceEntry};
use narrative_core::taxonomy::TaxonomyError;
use narrative_core::{
    aggregate, classify_dataset, load_taxonomy, partition_dataset, Document, LabelPair,
    PredictionFile, Taxonomy,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{ClassifyArgs, DatagenArgs, EnsembleArgs, PartitionArgs, ScoreArgs};

fn taxonomy(cfg: &RunConfig) -> Result<Taxonomy, CliError> {
    let path = cfg.taxonomy_path()?;
    load_taxonomy(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn documents(path: &Path) -> Result<Vec<Document>, CliError> {
    read_documents(path).map_err(|e| CliError::io(path.display(), e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path.display(), e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path.display(), e))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut out = create(path)?;
    for row in rows {
        serde_json::to_writer(&mut out, &row)
            .map_err(|e| CliError::io(path.display(), e))?;
        out.write_all(b"\n").map_err(|e| CliError::io(path.display(), e))?;
    }
    out.flush().map_err(|e| CliError::io(path.display(), e))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct TraceLine<'a> {
    document_id: &'a str,
    #[serde(flatten)]
    entry: &'a TraceEntry,
}

#[derive(Serialize)]
struct FailureManifest<'a> {
    documents: usize,
    succeeded: usize,
    failed: usize,
    failures: &'a [DocumentFailure],
}

pub fn classify(cfg: &RunConfig, args: &ClassifyArgs) -> Result<(), CliError> {
    let taxonomy = taxonomy(cfg)?;
    let docs = documents(cfg.dataset_path()?)?;
    let parallelism = cfg.parallelism()?;
    let backend = cfg.build_backend()?;

    let run = classify_dataset(&docs, &taxonomy, &backend, &cfg.pipeline(), parallelism);
    let file = PredictionFile::from_predictions(run.results.iter().map(|r| (r.document_id.as_str(), &r.labels)));
    write_text(&args.output, &file.to_tsv())?;

    if let Some(path) = &args.trace {
        write_jsonl(
            path,
            run.results.iter().flat_map(|r| {
                r.trace.iter().map(|entry| TraceLine { document_id: &r.document_id, entry })
            }),
        )?;
    }
    if let Some(path) = &args.run_log {
        write_jsonl(path, run.run_log())?;
    }
    eprintln!(
        "classified {} of {} documents into {}",
        run.results.len(),
        docs.len(),
        args.output.display()
    );
    if run.is_complete() {
        return Ok(());
    }

    let manifest_path = args.failures.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".failures.json");
        PathBuf::from(p)
    });
    let manifest = FailureManifest {
        documents: docs.len(),
        succeeded: run.results.len(),
        failed: run.failures.len(),
        failures: &run.failures,
    };
    write_text(&manifest_path, &pretty(&manifest))?;
    let summary = format!(
        "{} of {} documents failed; see {}",
        run.failures.len(),
        docs.len(),
        manifest_path.display()
    );
    if run.results.is_empty() {
        Err(CliError::Backend(summary))
    } else {
        Err(CliError::Partial(summary))
    }
}

fn read_predictions(path: &Path) -> Result<PredictionFile, CliError> {
    PredictionFile::read(path).map_err(|e| CliError::io(path.display(), e))
}

pub fn ensemble(cfg: &RunConfig, args: &EnsembleArgs) -> Result<(), CliError> {
    let strategy = cfg.strategy()?;
    let inputs = args
        .inputs
        .iter()
        .map(|p| read_predictions(p).map(|f| f.fine_map()))
        .collect::<Result<Vec<_>, _>>()?;
    let ensemble_error = |e| match e {
        EnsembleError::MismatchedIds { model, missing, extra } => CliError::Io(format!(
            "{} has different document ids from {}: missing {missing:?}, extra {extra:?}",
            args.inputs[model].display(),
            args.inputs[0].display()
        )),
        other => CliError::Config(other.to_string()),
    };
    let combined = aggregate(&inputs, strategy).map_err(ensemble_error)?;
    let mut file = PredictionFile::from_predictions(combined.iter().map(|(id, l)| (id.as_str(), l)));
    if args.coarse_separately {
        let coarse = aggregate_coarse(&inputs, strategy).map_err(ensemble_error)?;
        for row in &mut file.rows {
            row.coarse = coarse[&row.id].clone();
        }
    }
    write_text(&args.output, &file.to_tsv())?;
    eprintln!(
        "{strategy} of {} files over {} documents into {}",
        inputs.len(),
        combined.len(),
        args.output.display()
    );
    Ok(())
}

fn gold_map(docs: &[Document], path: &Path) -> Result<BTreeMap<String, BTreeSet<LabelPair>>, CliError> {
    docs.iter()
        .map(|d| match &d.gold {
            Some(_) => Ok((d.id.clone(), d.gold_set())),
            None => Err(CliError::Io(format!("{}: document {:?} has no labels", path.display(), d.id))),
        })
        .collect()
}

fn metrics_error(e: MetricsError) -> CliError {
    CliError::Io(e.to_string())
}

pub fn score(cfg: &RunConfig, args: &ScoreArgs) -> Result<(), CliError> {
    let options = cfg.metric_options()?;
    let file = read_predictions(&args.predictions)?;
    let predictions = file.fine_map();
    let coarse = args.coarse_from_column.then(|| file.coarse_map());
    let docs = documents(&args.gold)?;
    let gold = gold_map(&docs, &args.gold)?;
    let report = score_with_coarse(&predictions, coarse.as_ref(), &gold, &options).map_err(metrics_error)?;

    if let Some(path) = &args.report {
        write_text(path, &pretty(&report))?;
    }
    let table = report.to_table();
    match &args.table {
        Some(path) => write_text(path, &table)?,
        None => print!("{table}"),
    }
    if let Some(path) = &args.per_document {
        let mut out = csv::Writer::from_writer(create(path)?);
        for row in &report.per_document {
            out.serialize(row).map_err(|e| CliError::io(path.display(), e))?;
        }
        out.flush().map_err(|e| CliError::io(path.display(), e))?;
    }
    if let Some(path) = &args.by_language {
        let languages = docs.iter().map(|d| (d.id.clone(), d.language.clone())).collect();
        let grouped = score_by_language(&predictions, &gold, &languages, &options).map_err(metrics_error)?;
        write_text(path, &pretty(&grouped))?;
    }
    Ok(())
}

pub fn datagen(cfg: &RunConfig, args: &DatagenArgs) -> Result<(), CliError> {
    let taxonomy = taxonomy(cfg)?;
    if args.explain_prompt {
        let prompt = explanation_prompt_for(&taxonomy).map_err(|e| CliError::Config(e.to_string()))?;
        println!("{prompt}");
        return Ok(());
    }
    let output = args.output.as_deref().expect("clap requires --output");
    let parallelism = cfg.parallelism()?;
    let backend = cfg.build_backend()?;
    let run = generate_all(&taxonomy, &backend, &cfg.datagen(), parallelism)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let mut out = create(output)?;
    write_articles(&mut out, run.articles())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(output.display(), e))?;
    let short: Vec<&str> = run
        .outcomes
        .iter()
        .filter(|o| !o.reached_target)
        .map(|o| o.target.sub.as_str())
        .collect();
    eprintln!(
        "{} articles from {} requests ({:.2} per request) into {}",
        run.total_articles(),
        run.total_requests(),
        run.yield_per_request(),
        output.display()
    );
    if !short.is_empty() {
        eprintln!("below target: {}", short.join("; "));
    }
    if run.failures.is_empty() {
        return Ok(());
    }
    for f in &run.failures {
        eprintln!("failed: {f}");
    }
    let summary = format!("{} of {} sub-narratives failed", run.failures.len(), taxonomy.sub_count());
    if run.outcomes.is_empty() {
        Err(CliError::Backend(summary))
    } else {
        Err(CliError::Partial(summary))
    }
}

pub fn validate_taxonomy(path: &Path) -> Result<(), CliError> {
    match load_taxonomy(path) {
        Ok(t) => {
            println!(
                "OK: {} categories, {} main narratives, {} sub-narratives",
                t.categories().len(),
                t.main_count(),
                t.sub_count()
            );
            Ok(())
        }
        Err(e) => {
            println!("FAIL: {e}");
            match e {
                TaxonomyError::Io { .. } | TaxonomyError::Parse(_) => Err(CliError::io(path.display(), e)),
                TaxonomyError::Validation(_) => Err(CliError::Config(format!("{}: {e}", path.display()))),
            }
        }
    }
}

pub fn partition(cfg: &RunConfig, args: &PartitionArgs) -> Result<(), CliError> {
    let docs = documents(cfg.dataset_path()?)?;
    let k = cfg.ensemble.k;
    let parts = if args.bootstrap {
        bootstrap_dataset(&docs, k, cfg.seed)
    } else {
        partition_dataset(&docs, k, cfg.seed)
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(args.out_dir.display(), e))?;
    for (i, part) in parts.iter().enumerate() {
        let path = args.out_dir.join(format!("part-{i}.jsonl"));
        let mut out = create(&path)?;
        write_documents(&mut out, part)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(path.display(), e))?;
    }
    let sizes: Vec<String> = parts.iter().map(|p| p.len().to_string()).collect();
    eprintln!("{k} subsets of sizes {} in {}", sizes.join(", "), args.out_dir.display());
    Ok(())
}
