//! Turning raw completion text into taxonomy decisions.
//!
//! Nothing here fails: text that cannot be mapped degrades to the sentinel,
//! and every dropped token is reported so the caller can log it.

use serde::Serialize;

use crate::taxonomy::{normalize, Level, Resolution, Taxonomy};

/// Step 1 decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CategoryDecision {
    Category(String),
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryOutcome {
    pub decision: CategoryDecision,
    /// Set when the text matched nothing and was not an explicit "Other".
    pub unparsed: Option<String>,
}

/// Result of parsing a hash-separated Step 2 or Step 3 answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepOutcome {
    pub level: Level,
    /// Resolved taxonomy names, deduplicated, first occurrence first.
    pub labels: Vec<String>,
    /// True iff no label survived.
    pub other: bool,
    /// Tokens that resolved to nothing, in order of appearance.
    pub unknown: Vec<String>,
}

/// Step 1: exact normalized match first, then the unique category name
/// contained in the text, otherwise the sentinel.
pub fn parse_category(raw: &str, taxonomy: &Taxonomy) -> CategoryOutcome {
    match taxonomy.resolve_label(Level::Category, None, raw) {
        Resolution::Found(name) => {
            return CategoryOutcome {
                decision: CategoryDecision::Category(name.to_string()),
                unparsed: None,
            }
        }
        Resolution::Other => {
            return CategoryOutcome {
                decision: CategoryDecision::Other,
                unparsed: None,
            }
        }
        Resolution::NotFound => {}
    }
    let hay = raw.to_lowercase();
    let mut hits = taxonomy
        .category_names()
        .filter(|name| hay.contains(&normalize(name)));
    match (hits.next(), hits.next()) {
        (Some(name), None) => CategoryOutcome {
            decision: CategoryDecision::Category(name.to_string()),
            unparsed: None,
        },
        _ => CategoryOutcome {
            decision: CategoryDecision::Other,
            unparsed: Some(raw.to_string()),
        },
    }
}

/// Parse a hash-separated list of labels at `level`.
///
/// For [`Level::Main`] `parent` is the category; for [`Level::Sub`] it is the
/// main narrative. Sentinel tokens mixed with real labels are ignored.
pub fn parse_hash_list(
    raw: &str,
    level: Level,
    taxonomy: &Taxonomy,
    parent: Option<&str>,
) -> StepOutcome {
    parse_hash_list_in(raw, level, taxonomy, None, parent)
}

/// [`parse_hash_list`] with sub-narrative lookups pinned to `category`.
pub fn parse_hash_list_in(
    raw: &str,
    level: Level,
    taxonomy: &Taxonomy,
    category: Option<&str>,
    parent: Option<&str>,
) -> StepOutcome {
    let mut labels: Vec<String> = Vec::new();
    let mut unknown = Vec::new();
    for token in raw.split('#').map(str::trim).filter(|t| !t.is_empty()) {
        match taxonomy.resolve_scoped(category, level, parent, token) {
            Resolution::Found(name) => {
                if !labels.iter().any(|l| l == name) {
                    labels.push(name.to_string());
                }
            }
            Resolution::Other => {}
            Resolution::NotFound => unknown.push(token.to_string()),
        }
    }
    StepOutcome {
        level,
        other: labels.is_empty(),
        labels,
        unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::fixtures;

    #[test]
    fn category_exact_and_substring() {
        let t = fixtures::small();
        assert_eq!(
            parse_category("Climate Change", &t).decision,
            CategoryDecision::Category("Climate Change".into())
        );
        let out = parse_category("The category is: Ukraine-Russia War.", &t);
        assert_eq!(out.decision, CategoryDecision::Category("Ukraine-Russia War".into()));
        assert!(out.unparsed.is_none());
    }

    #[test]
    fn category_fallbacks() {
        let t = fixtures::small();
        let sports = parse_category("Sports", &t);
        assert_eq!(sports.decision, CategoryDecision::Other);
        assert_eq!(sports.unparsed.as_deref(), Some("Sports"));
        let other = parse_category(" other.", &t);
        assert_eq!(other.decision, CategoryDecision::Other);
        assert!(other.unparsed.is_none());
        let both = parse_category("Climate Change or Ukraine-Russia War", &t);
        assert_eq!(both.decision, CategoryDecision::Other);
    }

    #[test]
    fn hash_list_mains() {
        let t = fixtures::small();
        let out = parse_hash_list("N10#N11", Level::Main, &t, Some("Climate Change"));
        assert_eq!(out.labels, ["N10", "N11"]);
        assert!(!out.other);
        let out = parse_hash_list("Other", Level::Main, &t, Some("Climate Change"));
        assert!(out.other && out.labels.is_empty() && out.unknown.is_empty());
    }

    #[test]
    fn hash_list_drops_unknown_mains() {
        let t = fixtures::small();
        let out = parse_hash_list("Bogus#Nope", Level::Main, &t, Some("Climate Change"));
        assert!(out.other);
        assert_eq!(out.unknown, ["Bogus", "Nope"]);
        // a main from the other category is out of scope
        let out = parse_hash_list("N00", Level::Main, &t, Some("Climate Change"));
        assert!(out.other);
    }

    #[test]
    fn hash_list_subs_record_unknowns() {
        let t = fixtures::small();
        let out = parse_hash_list("S100#Bogus", Level::Sub, &t, Some("N10"));
        assert_eq!(out.labels, ["S100"]);
        assert_eq!(out.unknown, ["Bogus"]);
        assert!(!out.other);
    }

    #[test]
    fn sentinel_mixed_with_labels_is_ignored() {
        let t = fixtures::small();
        let out = parse_hash_list("Other#N10", Level::Main, &t, Some("Climate Change"));
        assert_eq!(out.labels, ["N10"]);
        assert!(!out.other && out.unknown.is_empty());
    }

    #[test]
    fn dedup_and_whitespace() {
        let t = fixtures::small();
        let a = parse_hash_list("N10#N10#N11", Level::Main, &t, None);
        let b = parse_hash_list(" N10 # N11 ", Level::Main, &t, None);
        assert_eq!(a, b);
        assert_eq!(a.labels, ["N10", "N11"]);
    }

    #[test]
    fn empty_text_is_other() {
        let t = fixtures::small();
        let out = parse_hash_list("  ", Level::Sub, &t, Some("N10"));
        assert!(out.other && out.unknown.is_empty());
    }
}
