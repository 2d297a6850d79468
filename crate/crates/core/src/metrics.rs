//! Multi-label scoring: per-document (samples) F1 at the fine and coarse
//! level, macro F1 over coarse labels, and the spread of per-document F1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::LabelPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseMode {
    /// Mean over documents of per-document F1.
    Samples,
    /// Mean over labels of per-label F1.
    Macro,
}

impl FromStr for CoarseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "samples" => Ok(CoarseMode::Samples),
            "macro" => Ok(CoarseMode::Macro),
            other => Err(format!("unknown coarse mode {other:?}")),
        }
    }
}

impl fmt::Display for CoarseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoarseMode::Samples => "samples",
            CoarseMode::Macro => "macro",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricOptions {
    /// F1 assigned when prediction and gold are both empty.
    pub both_empty: f64,
    pub coarse_mode: CoarseMode,
    /// Extra coarse labels to include in the macro average even when never
    /// observed (they contribute F1 = 0).
    pub macro_labels: Vec<String>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            both_empty: 1.0,
            coarse_mode: CoarseMode::Macro,
            macro_labels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub id: String,
    pub f1_fine: f64,
    pub f1_coarse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    pub f1_samples_fine: f64,
    pub f1_samples_fine_std: f64,
    pub f1_coarse: f64,
    pub f1_coarse_std: f64,
    pub coarse_mode: CoarseMode,
    pub both_empty: f64,
    pub per_document: Vec<DocumentScore>,
    /// Gold ids with no prediction; scored as empty predictions.
    pub missing_predictions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("predictions for ids absent from gold: {0:?}")]
    UnknownIds(Vec<String>),
    #[error("no gold documents to score")]
    Empty,
}

/// `2|P∩G| / (|P|+|G|)`, with `both_empty` when both sets are empty.
pub fn sample_f1_with<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>, both_empty: f64) -> f64 {
    let denom = pred.len() + gold.len();
    if denom == 0 {
        return both_empty;
    }
    let overlap = pred.intersection(gold).count();
    (2 * overlap) as f64 / denom as f64
}

/// [`sample_f1_with`] using the default both-empty value of 1.
pub fn sample_f1<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> f64 {
    sample_f1_with(pred, gold, 1.0)
}

/// Unweighted mean of per-label F1 across documents.
///
/// `docs` pairs each document's predicted and gold sets. The label universe
/// is every label seen on either side plus `extra`.
pub fn macro_f1(docs: &[(BTreeSet<String>, BTreeSet<String>)], extra: &[String], both_empty: f64) -> f64 {
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for label in extra {
        counts.entry(label.as_str()).or_default();
    }
    for (pred, gold) in docs {
        for label in pred.union(gold) {
            let c = counts.entry(label.as_str()).or_default();
            match (pred.contains(label), gold.contains(label)) {
                (true, true) => c.0 += 1,
                (true, false) => c.1 += 1,
                (false, true) => c.2 += 1,
                (false, false) => unreachable!(),
            }
        }
    }
    if counts.is_empty() {
        return both_empty;
    }
    let total: f64 = counts
        .values()
        .map(|&(tp, fp, fn_)| {
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                (2 * tp) as f64 / denom as f64
            }
        })
        .sum();
    total / counts.len() as f64
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn fine_labels(pairs: &BTreeSet<LabelPair>) -> BTreeSet<String> {
    pairs.iter().map(LabelPair::render_fine).collect()
}

pub fn coarse_labels(pairs: &BTreeSet<LabelPair>) -> BTreeSet<String> {
    pairs.iter().map(|p| p.render_coarse().to_string()).collect()
}

/// Score `predictions` against `gold`. Every gold id is scored; a missing
/// prediction counts as an empty set.
pub fn score(
    predictions: &BTreeMap<String, BTreeSet<LabelPair>>,
    gold: &BTreeMap<String, BTreeSet<LabelPair>>,
    options: &MetricOptions,
) -> Result<EvalReport, MetricsError> {
    score_with_coarse(predictions, None, gold, options)
}

/// [`score`] with predicted main narratives taken from `coarse` instead of
/// projected from the predicted pairs, e.g. after aggregating them
/// separately in an ensemble.
pub fn score_with_coarse(
    predictions: &BTreeMap<String, BTreeSet<LabelPair>>,
    coarse: Option<&BTreeMap<String, BTreeSet<String>>>,
    gold: &BTreeMap<String, BTreeSet<LabelPair>>,
    options: &MetricOptions,
) -> Result<EvalReport, MetricsError> {
    let unknown: Vec<String> = predictions
        .keys()
        .chain(coarse.into_iter().flat_map(|c| c.keys()))
        .filter(|id| !gold.contains_key(*id))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !unknown.is_empty() {
        return Err(MetricsError::UnknownIds(unknown));
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }

    let empty = BTreeSet::new();
    let mut missing = Vec::new();
    let mut per_document = Vec::with_capacity(gold.len());
    let mut coarse_sets = Vec::with_capacity(gold.len());
    for (id, gold_pairs) in gold {
        let pred_pairs = predictions.get(id).unwrap_or_else(|| {
            missing.push(id.clone());
            &empty
        });
        let f1_fine = sample_f1_with(&fine_labels(pred_pairs), &fine_labels(gold_pairs), options.both_empty);
        let pc = match coarse {
            Some(map) => map.get(id).cloned().unwrap_or_default(),
            None => coarse_labels(pred_pairs),
        };
        let gc = coarse_labels(gold_pairs);
        let f1_coarse = sample_f1_with(&pc, &gc, options.both_empty);
        coarse_sets.push((pc, gc));
        per_document.push(DocumentScore {
            id: id.clone(),
            f1_fine,
            f1_coarse,
        });
    }
    if !missing.is_empty() {
        tracing::warn!(count = missing.len(), "gold documents without predictions scored as empty");
    }

    let fine: Vec<f64> = per_document.iter().map(|d| d.f1_fine).collect();
    let coarse: Vec<f64> = per_document.iter().map(|d| d.f1_coarse).collect();
    let f1_coarse = match options.coarse_mode {
        CoarseMode::Samples => mean(&coarse),
        CoarseMode::Macro => macro_f1(&coarse_sets, &options.macro_labels, options.both_empty),
    };
    Ok(EvalReport {
        documents: per_document.len(),
        f1_samples_fine: mean(&fine),
        f1_samples_fine_std: std_dev(&fine),
        f1_coarse,
        f1_coarse_std: std_dev(&coarse),
        coarse_mode: options.coarse_mode,
        both_empty: options.both_empty,
        per_document,
        missing_predictions: missing,
    })
}

/// Score each language group separately. Documents without a language entry
/// are grouped under `"unknown"`.
pub fn score_by_language(
    predictions: &BTreeMap<String, BTreeSet<LabelPair>>,
    gold: &BTreeMap<String, BTreeSet<LabelPair>>,
    languages: &BTreeMap<String, String>,
    options: &MetricOptions,
) -> Result<BTreeMap<String, EvalReport>, MetricsError> {
    let mut groups: BTreeMap<&str, BTreeMap<String, BTreeSet<LabelPair>>> = BTreeMap::new();
    for (id, labels) in gold {
        let lang = languages.get(id).map_or("unknown", String::as_str);
        groups.entry(lang).or_default().insert(id.clone(), labels.clone());
    }
    groups
        .into_iter()
        .map(|(lang, gold_group)| {
            let preds = predictions
                .iter()
                .filter(|(id, _)| gold_group.contains_key(*id))
                .map(|(id, l)| (id.clone(), l.clone()))
                .collect();
            score(&preds, &gold_group, options).map(|r| (lang.to_string(), r))
        })
        .collect()
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let coarse_name = match self.coarse_mode {
            CoarseMode::Samples => "F1 Samples Coarse",
            CoarseMode::Macro => "F1 Macro Coarse",
        };
        let _ = writeln!(out, "{:<22} {:>8} {:>8}", "metric", "value", "std");
        let _ = writeln!(out, "{:<22} {:>8.4} {:>8.4}", coarse_name, self.f1_coarse, self.f1_coarse_std);
        let _ = writeln!(
            out,
            "{:<22} {:>8.4} {:>8.4}",
            "F1 Samples Fine", self.f1_samples_fine, self.f1_samples_fine_std
        );
        let _ = writeln!(out, "documents: {}", self.documents);
        if !self.missing_predictions.is_empty() {
            let _ = writeln!(out, "missing predictions: {}", self.missing_predictions.len());
        }
        out
    }
}
