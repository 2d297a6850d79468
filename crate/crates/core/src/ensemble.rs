//! Combining per-document label sets from several models, and splitting a
//! dataset into per-model training subsets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Document;
use crate::taxonomy::{LabelPair, OTHER};

/// Per-document label sets from one model.
pub type Predictions<T = LabelPair> = BTreeMap<String, BTreeSet<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Any model.
    Union,
    /// Strictly more than half of the models.
    Majority,
    /// Every model.
    Intersection,
}

impl Strategy {
    /// Minimum number of models that must predict a label for it to be kept.
    pub fn threshold(self, k: usize) -> usize {
        match self {
            Strategy::Union => 1,
            Strategy::Majority => k / 2 + 1,
            Strategy::Intersection => k,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Union => "union",
            Strategy::Majority => "majority",
            Strategy::Intersection => "intersection",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "union" => Ok(Strategy::Union),
            "majority" | "majority-vote" => Ok(Strategy::Majority),
            "intersection" => Ok(Strategy::Intersection),
            other => Err(format!("unknown ensemble strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnsembleError {
    #[error("ensemble needs at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("model {model} document ids differ from model 0: missing {missing:?}, extra {extra:?}")]
    MismatchedIds {
        model: usize,
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("cannot split {size} documents into {k} subsets")]
    TooManySubsets { k: usize, size: usize },
}

fn check_keys<T>(inputs: &[Predictions<T>]) -> Result<(), EnsembleError> {
    let first = &inputs[0];
    for (model, other) in inputs.iter().enumerate().skip(1) {
        let missing: Vec<String> = first.keys().filter(|k| !other.contains_key(*k)).cloned().collect();
        let extra: Vec<String> = other.keys().filter(|k| !first.contains_key(*k)).cloned().collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(EnsembleError::MismatchedIds { model, missing, extra });
        }
    }
    Ok(())
}

/// Keep, per document, every label predicted by at least `min_votes` of the
/// models. Accepts a single model; empty results stay empty.
pub fn vote<T: Ord + Clone>(
    inputs: &[Predictions<T>],
    min_votes: usize,
) -> Result<Predictions<T>, EnsembleError> {
    if inputs.is_empty() {
        return Err(EnsembleError::TooFewModels(0));
    }
    check_keys(inputs)?;
    let mut out = Predictions::new();
    for id in inputs[0].keys() {
        let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
        for model in inputs {
            for label in &model[id] {
                *counts.entry(label).or_default() += 1;
            }
        }
        let kept = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_votes)
            .map(|(l, _)| l.clone())
            .collect();
        out.insert(id.clone(), kept);
    }
    Ok(out)
}

/// [`aggregate`] over any label type, substituting `sentinel` for empty
/// results.
pub fn aggregate_labels<T: Ord + Clone>(
    inputs: &[Predictions<T>],
    strategy: Strategy,
    sentinel: &T,
) -> Result<Predictions<T>, EnsembleError> {
    if inputs.len() < 2 {
        return Err(EnsembleError::TooFewModels(inputs.len()));
    }
    let mut out = vote(inputs, strategy.threshold(inputs.len()))?;
    for labels in out.values_mut() {
        if labels.is_empty() {
            labels.insert(sentinel.clone());
        }
    }
    Ok(out)
}

/// Combine label pairs from `k >= 2` models. A document whose combined set
/// is empty gets the sentinel pair.
pub fn aggregate(
    inputs: &[Predictions<LabelPair>],
    strategy: Strategy,
) -> Result<Predictions<LabelPair>, EnsembleError> {
    aggregate_labels(inputs, strategy, &LabelPair::other())
}

/// Main narratives of each document's pairs.
pub fn project_coarse(preds: &Predictions<LabelPair>) -> Predictions<String> {
    preds
        .iter()
        .map(|(id, pairs)| {
            (
                id.clone(),
                pairs.iter().map(|p| p.main().to_string()).collect(),
            )
        })
        .collect()
}

/// Aggregate main-narrative sets directly instead of projecting combined
/// pairs.
pub fn aggregate_coarse(
    inputs: &[Predictions<LabelPair>],
    strategy: Strategy,
) -> Result<Predictions<String>, EnsembleError> {
    let coarse: Vec<_> = inputs.iter().map(project_coarse).collect();
    aggregate_labels(&coarse, strategy, &OTHER.to_string())
}

/// Shuffle with `seed`, then deal documents round-robin into `k` disjoint
/// subsets whose sizes differ by at most one.
pub fn partition_dataset(
    docs: &[Document],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<Document>>, EnsembleError> {
    if k == 0 || k > docs.len() {
        return Err(EnsembleError::TooManySubsets { k, size: docs.len() });
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = vec![Vec::with_capacity(docs.len() / k + 1); k];
    for (slot, idx) in order.into_iter().enumerate() {
        parts[slot % k].push(docs[idx].clone());
    }
    Ok(parts)
}

/// Bootstrap alternative: `k` samples of `docs.len()` documents drawn with
/// replacement.
pub fn bootstrap_dataset(
    docs: &[Document],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<Document>>, EnsembleError> {
    if k == 0 || docs.is_empty() {
        return Err(EnsembleError::TooManySubsets { k, size: docs.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..k)
        .map(|_| {
            (0..docs.len())
                .map(|_| docs[rng.random_range(0..docs.len())].clone())
                .collect()
        })
        .collect())
}
