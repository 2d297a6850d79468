//! Tab-separated prediction files.
//!
//! One row per document: `id<TAB>coarse<TAB>fine`, where both label columns
//! are `;`-separated. Fine labels are rendered `"Main: Sub"`, coarse labels
//! as the main narrative, and the sentinel as `"Other"` in both.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ensemble::Predictions;
use crate::taxonomy::{LabelPair, OTHER};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRow {
    pub id: String,
    pub coarse: BTreeSet<String>,
    pub fine: BTreeSet<LabelPair>,
}

impl PredictionRow {
    /// Row whose coarse column is the projection of `fine`.
    pub fn from_pairs(id: impl Into<String>, fine: BTreeSet<LabelPair>) -> Self {
        PredictionRow {
            id: id.into(),
            coarse: fine.iter().map(|p| p.render_coarse().to_string()).collect(),
            fine,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionFile {
    pub rows: Vec<PredictionRow>,
}

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn join<I: IntoIterator<Item = S>, S: AsRef<str>>(items: I) -> String {
    items
        .into_iter()
        .map(|s| s.as_ref().to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn split_column(col: &str) -> impl Iterator<Item = &str> {
    col.split(';').map(str::trim).filter(|s| !s.is_empty())
}

/// Recover the pair behind a rendered fine label. The row's coarse labels
/// disambiguate main narratives that themselves contain `": "`.
fn parse_fine(label: &str, coarse: &BTreeSet<String>) -> Option<LabelPair> {
    if label == OTHER {
        return Some(LabelPair::other());
    }
    let by_coarse = coarse
        .iter()
        .filter(|c| c.as_str() != OTHER)
        .filter_map(|c| {
            label
                .strip_prefix(c.as_str())
                .and_then(|rest| rest.strip_prefix(": "))
                .map(|sub| (c.as_str(), sub))
        })
        .max_by_key(|(c, _)| c.len());
    let (main, sub) = by_coarse.or_else(|| label.split_once(": "))?;
    if sub.is_empty() {
        return None;
    }
    LabelPair::new(main, sub).ok()
}

impl PredictionFile {
    pub fn from_predictions<'a>(
        rows: impl IntoIterator<Item = (&'a str, &'a BTreeSet<LabelPair>)>,
    ) -> Self {
        PredictionFile {
            rows: rows
                .into_iter()
                .map(|(id, labels)| PredictionRow::from_pairs(id, labels.clone()))
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, PredictionError> {
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let malformed = |message: String| PredictionError::Malformed { line: line_no, message };
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(malformed(format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let id = cols[0].trim();
            if id.is_empty() {
                return Err(malformed("empty document id".into()));
            }
            if !seen.insert(id.to_string()) {
                return Err(malformed(format!("duplicate document id {id:?}")));
            }
            let coarse: BTreeSet<String> = split_column(cols[1]).map(str::to_string).collect();
            let fine = split_column(cols[2])
                .map(|l| parse_fine(l, &coarse).ok_or_else(|| malformed(format!("bad fine label {l:?}"))))
                .collect::<Result<BTreeSet<_>, _>>()?;
            rows.push(PredictionRow { id: id.to_string(), coarse, fine });
        }
        Ok(PredictionFile { rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, PredictionError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PredictionError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&row.id);
            out.push('\t');
            out.push_str(&join(&row.coarse));
            out.push('\t');
            out.push_str(&join(row.fine.iter().map(LabelPair::render_fine)));
            out.push('\n');
        }
        out
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(self.to_tsv().as_bytes())
    }

    /// Fine label pairs keyed by document id.
    pub fn fine_map(&self) -> Predictions<LabelPair> {
        self.rows.iter().map(|r| (r.id.clone(), r.fine.clone())).collect()
    }

    pub fn coarse_map(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.rows.iter().map(|r| (r.id.clone(), r.coarse.clone())).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.id.as_str())
    }
}
