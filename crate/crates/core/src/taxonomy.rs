//! Two-level narrative taxonomy: category → main narrative → sub-narrative.
//!
//! A [`Taxonomy`] can only be obtained through validation, so every value in
//! circulation satisfies the naming rules: unique names within a parent, no
//! reserved `"Other"` entries, no separator characters, non-empty
//! explanations.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved sentinel label emitted when no taxonomy entry applies.
pub const OTHER: &str = "Other";

/// Characters that would collide with the hash-separated response format or
/// the prediction file layout.
const FORBIDDEN_CHARS: [char; 5] = ['#', ';', '\t', '\n', '\r'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Category,
    Main,
    Sub,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Category => "category",
            Level::Main => "main narrative",
            Level::Sub => "sub-narrative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubNarrative {
    pub name: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MainNarrative {
    pub name: String,
    pub explanation: String,
    pub subnarratives: Vec<SubNarrative>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub narratives: Vec<MainNarrative>,
}

/// A validated, immutable taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Taxonomy {
    categories: Vec<Category>,
}

#[derive(Deserialize)]
struct RawTaxonomy {
    categories: Vec<Category>,
}

/// Borrowed view of one sub-narrative together with its ancestry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubRef<'a> {
    pub category: &'a str,
    pub main: &'a str,
    pub sub: &'a SubNarrative,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("cannot read taxonomy {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed taxonomy document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid taxonomy: {0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("taxonomy has no categories")]
    NoCategories,
    #[error("category {category:?} has no main narratives")]
    NoNarratives { category: String },
    #[error("main narrative {main:?} has no sub-narratives")]
    NoSubnarratives { main: String },
    #[error("empty {level} name under {parent:?}")]
    EmptyName { level: Level, parent: String },
    #[error("duplicate {level} {name:?} under {parent:?}")]
    DuplicateName {
        level: Level,
        name: String,
        parent: String,
    },
    #[error("{level} {name:?} uses the reserved label \"Other\"")]
    ReservedName { level: Level, name: String },
    #[error("{level} {name:?} contains a forbidden character {ch:?}")]
    ForbiddenCharacter { level: Level, name: String, ch: char },
    #[error("{level} {name:?} has an empty explanation")]
    EmptyExplanation { level: Level, name: String },
}

/// Canonical comparison form of a label: surrounding whitespace and quotes
/// removed, trailing `.,;:` removed, lowercased.
pub fn normalize(raw: &str) -> String {
    let mut s = raw;
    loop {
        let next = s
            .trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '*'))
            .trim_end_matches(['.', ',', ';', ':']);
        if next.len() == s.len() {
            break;
        }
        s = next;
    }
    s.to_lowercase()
}

/// Returns true when `raw` normalizes to the sentinel.
pub fn is_other(raw: &str) -> bool {
    normalize(raw) == "other"
}

/// Outcome of resolving a raw model token against the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution<'a> {
    Found(&'a str),
    Other,
    NotFound,
}

impl Taxonomy {
    pub fn new(categories: Vec<Category>) -> Result<Self, ValidationError> {
        let taxonomy = Taxonomy { categories };
        taxonomy.validate()?;
        Ok(taxonomy)
    }

    pub fn from_json_str(text: &str) -> Result<Self, TaxonomyError> {
        let raw: RawTaxonomy = serde_json::from_str(text)?;
        Ok(Taxonomy::new(raw.categories)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("taxonomy serializes")
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn category(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.name.as_str())
    }

    /// Main narratives named `name`, optionally restricted to one category.
    fn mains_named(&self, category: Option<&str>, name: &str) -> Vec<&MainNarrative> {
        self.categories
            .iter()
            .filter(|c| category.is_none_or(|cat| c.name == cat))
            .flat_map(|c| c.narratives.iter())
            .filter(|m| m.name == name)
            .collect()
    }

    pub fn main(&self, category: &str, name: &str) -> Option<&MainNarrative> {
        self.mains_named(Some(category), name).into_iter().next()
    }

    pub fn subnarratives(&self) -> impl Iterator<Item = SubRef<'_>> {
        self.categories.iter().flat_map(|c| {
            c.narratives.iter().flat_map(move |m| {
                m.subnarratives.iter().map(move |s| SubRef {
                    category: &c.name,
                    main: &m.name,
                    sub: s,
                })
            })
        })
    }

    pub fn main_count(&self) -> usize {
        self.categories.iter().map(|c| c.narratives.len()).sum()
    }

    pub fn sub_count(&self) -> usize {
        self.subnarratives().count()
    }

    /// Resolve a raw token at `level`.
    ///
    /// For [`Level::Main`] the optional parent is a category name; for
    /// [`Level::Sub`] it is the main narrative name and must be given.
    /// For [`Level::Category`] the parent is ignored.
    pub fn resolve_label(&self, level: Level, parent: Option<&str>, raw: &str) -> Resolution<'_> {
        self.resolve_scoped(None, level, parent, raw)
    }

    /// Like [`Taxonomy::resolve_label`] but sub-narrative lookups can be pinned
    /// to one category, which matters when two categories share a main
    /// narrative name.
    pub fn resolve_scoped(
        &self,
        category: Option<&str>,
        level: Level,
        parent: Option<&str>,
        raw: &str,
    ) -> Resolution<'_> {
        let wanted = normalize(raw);
        if wanted == "other" {
            return Resolution::Other;
        }
        let hit = match level {
            Level::Category => self
                .categories
                .iter()
                .map(|c| c.name.as_str())
                .find(|n| normalize(n) == wanted),
            Level::Main => self
                .categories
                .iter()
                .filter(|c| parent.or(category).is_none_or(|p| c.name == p))
                .flat_map(|c| c.narratives.iter())
                .map(|m| m.name.as_str())
                .find(|n| normalize(n) == wanted),
            Level::Sub => {
                let Some(main) = parent else {
                    return Resolution::NotFound;
                };
                self.mains_named(category, main)
                    .into_iter()
                    .flat_map(|m| m.subnarratives.iter())
                    .map(|s| s.name.as_str())
                    .find(|n| normalize(n) == wanted)
            }
        };
        hit.map_or(Resolution::NotFound, Resolution::Found)
    }

    fn validate(&self) -> Result<(), ValidationError> {
        if self.categories.is_empty() {
            return Err(ValidationError::NoCategories);
        }
        let mut cat_seen = HashSet::new();
        for cat in &self.categories {
            check_name(Level::Category, &cat.name, "taxonomy", &mut cat_seen)?;
            if cat.narratives.is_empty() {
                return Err(ValidationError::NoNarratives {
                    category: cat.name.clone(),
                });
            }
            let mut main_seen = HashSet::new();
            for main in &cat.narratives {
                check_name(Level::Main, &main.name, &cat.name, &mut main_seen)?;
                check_explanation(Level::Main, &main.name, &main.explanation)?;
                if main.subnarratives.is_empty() {
                    return Err(ValidationError::NoSubnarratives {
                        main: main.name.clone(),
                    });
                }
                let mut sub_seen = HashSet::new();
                for sub in &main.subnarratives {
                    check_name(Level::Sub, &sub.name, &main.name, &mut sub_seen)?;
                    check_explanation(Level::Sub, &sub.name, &sub.explanation)?;
                }
            }
        }
        Ok(())
    }
}

fn check_name(
    level: Level,
    name: &str,
    parent: &str,
    seen: &mut HashSet<String>,
) -> Result<(), ValidationError> {
    let key = normalize(name);
    if key.is_empty() {
        return Err(ValidationError::EmptyName {
            level,
            parent: parent.to_string(),
        });
    }
    if key == "other" {
        return Err(ValidationError::ReservedName {
            level,
            name: name.to_string(),
        });
    }
    if let Some(ch) = name.chars().find(|c| FORBIDDEN_CHARS.contains(c)) {
        return Err(ValidationError::ForbiddenCharacter {
            level,
            name: name.to_string(),
            ch,
        });
    }
    if !seen.insert(key) {
        return Err(ValidationError::DuplicateName {
            level,
            name: name.to_string(),
            parent: parent.to_string(),
        });
    }
    Ok(())
}

fn check_explanation(level: Level, name: &str, explanation: &str) -> Result<(), ValidationError> {
    if explanation.trim().is_empty() {
        return Err(ValidationError::EmptyExplanation {
            level,
            name: name.to_string(),
        });
    }
    Ok(())
}

/// Read and validate a taxonomy document from disk.
pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy, TaxonomyError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Taxonomy::from_json_str(&text)
}

/// A (main narrative, sub-narrative) assignment. `(Other, Other)` is the
/// sentinel pair; `(main, Other)` marks a main narrative with no recognised
/// sub-narrative.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct LabelPair {
    main: String,
    sub: String,
}

#[derive(Deserialize)]
struct RawPair {
    main: String,
    sub: String,
}

impl TryFrom<RawPair> for LabelPair {
    type Error = LabelError;

    fn try_from(raw: RawPair) -> Result<Self, Self::Error> {
        LabelPair::new(raw.main, raw.sub)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("label pair ({main:?}, {sub:?}): sentinel main narrative requires sentinel sub-narrative")]
pub struct LabelError {
    pub main: String,
    pub sub: String,
}

impl LabelPair {
    pub fn new(main: impl Into<String>, sub: impl Into<String>) -> Result<Self, LabelError> {
        let (main, sub) = (main.into(), sub.into());
        if main == OTHER && sub != OTHER {
            return Err(LabelError { main, sub });
        }
        Ok(LabelPair { main, sub })
    }

    pub fn other() -> Self {
        LabelPair {
            main: OTHER.to_string(),
            sub: OTHER.to_string(),
        }
    }

    /// `(main, Other)`.
    pub fn main_only(main: impl Into<String>) -> Self {
        LabelPair {
            main: main.into(),
            sub: OTHER.to_string(),
        }
    }

    pub fn main(&self) -> &str {
        &self.main
    }

    pub fn sub(&self) -> &str {
        &self.sub
    }

    pub fn is_other(&self) -> bool {
        self.main == OTHER
    }

    /// Canonical fine-grained label text: `"Main: Sub"`, or `"Other"` for the
    /// sentinel pair.
    pub fn render_fine(&self) -> String {
        if self.is_other() {
            OTHER.to_string()
        } else {
            format!("{}: {}", self.main, self.sub)
        }
    }

    /// Canonical coarse-grained label text: the main narrative.
    pub fn render_coarse(&self) -> &str {
        &self.main
    }
}

impl fmt::Display for LabelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_fine())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// 2 categories, 2 mains each, 3 subs per main.
    pub fn small() -> Taxonomy {
        let mut cats = Vec::new();
        for (ci, cname) in ["Ukraine-Russia War", "Climate Change"].iter().enumerate() {
            let mut narratives = Vec::new();
            for mi in 0..2 {
                let name = format!("N{}{}", ci, mi);
                narratives.push(MainNarrative {
                    explanation: format!("about {name}"),
                    subnarratives: (0..3)
                        .map(|si| SubNarrative {
                            name: format!("S{ci}{mi}{si}"),
                            explanation: format!("sub {si} of {name}"),
                        })
                        .collect(),
                    name,
                });
            }
            cats.push(Category {
                name: cname.to_string(),
                narratives,
            });
        }
        Taxonomy::new(cats).unwrap()
    }
}
