//! JSON-lines document datasets.
//!
//! Each line is either a labelled document
//! `{"id", "text", "language", "labels": [{"main", "sub"}]}` or a record
//! produced by article generation, which is converted on load.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::SyntheticArticle;
use crate::taxonomy::LabelPair;

fn default_language() -> String {
    "en".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(rename = "labels", default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<LabelPair>>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            language: default_language(),
            gold: None,
        }
    }

    pub fn with_gold(mut self, gold: impl IntoIterator<Item = LabelPair>) -> Self {
        self.gold = Some(gold.into_iter().collect());
        self
    }

    pub fn gold_set(&self) -> BTreeSet<LabelPair> {
        self.gold.iter().flatten().cloned().collect()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Record {
    Document(Document),
    Synthetic(SyntheticArticle),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("duplicate document id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },
}

pub fn parse_documents(text: &str) -> Result<Vec<Document>, DatasetError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut per_request: HashMap<String, usize> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| DatasetError::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        let doc = match record {
            Record::Document(d) => d,
            Record::Synthetic(a) => {
                let n = per_request.entry(a.source_request_id.clone()).or_default();
                *n += 1;
                a.to_document(format!("{}-{}", a.source_request_id, n))
            }
        };
        if doc.text.trim().is_empty() {
            return Err(DatasetError::Line {
                line: line_no,
                message: format!("document {:?} has empty text", doc.id),
            });
        }
        if !seen.insert(doc.id.clone()) {
            return Err(DatasetError::DuplicateId { id: doc.id, line: line_no });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_documents(path: impl AsRef<Path>) -> Result<Vec<Document>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_documents(&text)
}

pub fn write_documents<W: Write>(mut out: W, docs: &[Document]) -> io::Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
