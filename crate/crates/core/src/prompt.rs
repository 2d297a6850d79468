//! Prompt templates for the three classification steps, article generation,
//! and explanation drafting.
//!
//! Substitution is single-pass over the template: placeholder syntax inside
//! substituted values (document text with braces, for example) is copied
//! through untouched.

use std::fmt;

use thiserror::Error;

const STEP1: &str = r#"Given the following document text, classify it into one of the two categories: "Ukraine-Russia War" or "Climate Change".

Document Text: {document_text}

Determine the category that closely or partially fits the document. If neither category applies, return "Other". Return only the output, without any additional explanations or text."#;

const STEP2: &str = r#"The document text given below is related to "{category}".
Please classify the document text into the most relevant narratives. Below is a list of narratives along with their explanations:

{narratives_list_with_explanations}

Document Text: {document_text}

Return the most relevant narratives as a hash-separated string (e.g., Narrative1#Narrative2..). If no specific narrative can be assigned, just return "Other" and nothing else. Return only the output, without any additional explanations or text."#;

const STEP3: &str = r#"The document text given below is related to "{category}" and its main narrative is: "{main_narrative}".
Please classify the document text into the most relevant sub-narratives. Below is a list of sub-narratives along with their explanations:

{sub_narratives_list_with_explanations}

Document Text: {document_text}

Return the most relevant sub-narratives as a hash-separated string (e.g., Sub-narrative1#Sub-narrative2..). If no specific sub-narrative can be assigned, just return "Other" and nothing else. Return only the output, without any additional explanations or text."#;

const DATAGEN: &str = r#"You are an AI news curator. Generate 5 different news articles related to the following topic on {category}.

Topic: {sub_narrative}
Explanation: {explanation}

Each article should be between 400-500 words and explore a unique aspect, perspective, or event related to this topic. Focus on delivering informative, coherent, and engaging articles that reflect diverse points of view or angles on the given topic. Avoid redundancy by ensuring that each article highlights a different aspect or argument related to the context provided. The output format should look like this:
Article 1:
Article 2:
Article 3:
Article 4:
Article 5:"#;

const EXPLAIN: &str = r#"You are given main narratives and sub-narratives for the Ukraine-Russia War and Climate Change. Now, provide a concise explanation for each main narrative and its sub-narratives.

{main_narratives}
{sub_narratives}"#;

/// Number of articles the generation prompt asks for per call.
pub const ARTICLES_PER_PROMPT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateName {
    Step1,
    Step2,
    Step3,
    Datagen,
    Explain,
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateName::Step1 => "step1",
            TemplateName::Step2 => "step2",
            TemplateName::Step3 => "step3",
            TemplateName::Datagen => "datagen",
            TemplateName::Explain => "explain",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: &'static str,
}

pub const TEMPLATES: [PromptTemplate; 5] = [
    PromptTemplate { name: TemplateName::Step1, body: STEP1 },
    PromptTemplate { name: TemplateName::Step2, body: STEP2 },
    PromptTemplate { name: TemplateName::Step3, body: STEP3 },
    PromptTemplate { name: TemplateName::Datagen, body: DATAGEN },
    PromptTemplate { name: TemplateName::Explain, body: EXPLAIN },
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("{template}: field {field} must not be empty")]
    EmptyField {
        template: TemplateName,
        field: &'static str,
    },
    #[error("{template}: no binding for placeholder {{{placeholder}}}")]
    Unbound {
        template: TemplateName,
        placeholder: String,
    },
}

/// Scan `body` for `{identifier}` placeholders, in order of appearance.
fn scan(body: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    let bytes = body.as_bytes();
    let mut pos = 0;
    std::iter::from_fn(move || {
        while let Some(off) = body[pos..].find('{') {
            let start = pos + off;
            let ident_len = bytes[start + 1..]
                .iter()
                .take_while(|b| b.is_ascii_lowercase() || **b == b'_')
                .count();
            let end = start + 1 + ident_len;
            pos = start + 1;
            if ident_len > 0 && bytes.get(end) == Some(&b'}') {
                pos = end + 1;
                return Some((start, end + 1, &body[start + 1..end]));
            }
        }
        None
    })
}

impl PromptTemplate {
    pub fn get(name: TemplateName) -> PromptTemplate {
        TEMPLATES.into_iter().find(|t| t.name == name).unwrap()
    }

    pub fn placeholders(&self) -> Vec<&'static str> {
        scan(self.body).map(|(_, _, name)| name).collect()
    }

    /// Substitute every placeholder from `bindings` in one pass.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut last = 0;
        for (start, end, name) in scan(self.body) {
            let value = bindings
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| PromptError::Unbound {
                    template: self.name,
                    placeholder: name.to_string(),
                })?;
            out.push_str(&self.body[last..start]);
            out.push_str(value);
            last = end;
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }
}

fn require(template: TemplateName, field: &'static str, value: &str) -> Result<(), PromptError> {
    if value.trim().is_empty() {
        Err(PromptError::EmptyField { template, field })
    } else {
        Ok(())
    }
}

/// One `- name: explanation` line per entry.
pub fn render_list<S: AsRef<str>, E: AsRef<str>>(entries: &[(S, E)]) -> String {
    entries
        .iter()
        .map(|(name, expl)| format!("- {}: {}", name.as_ref(), expl.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_names<S: AsRef<str>>(names: &[S]) -> String {
    names
        .iter()
        .map(|n| format!("- {}", n.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_step1(document_text: &str) -> Result<String, PromptError> {
    require(TemplateName::Step1, "document_text", document_text)?;
    PromptTemplate::get(TemplateName::Step1).render(&[("document_text", document_text)])
}

pub fn render_step2<S: AsRef<str>, E: AsRef<str>>(
    category: &str,
    narratives: &[(S, E)],
    document_text: &str,
) -> Result<String, PromptError> {
    let name = TemplateName::Step2;
    require(name, "category", category)?;
    require(name, "document_text", document_text)?;
    if narratives.is_empty() {
        return Err(PromptError::EmptyField { template: name, field: "narratives" });
    }
    let list = render_list(narratives);
    PromptTemplate::get(name).render(&[
        ("category", category),
        ("narratives_list_with_explanations", &list),
        ("document_text", document_text),
    ])
}

pub fn render_step3<S: AsRef<str>, E: AsRef<str>>(
    category: &str,
    main_narrative: &str,
    subnarratives: &[(S, E)],
    document_text: &str,
) -> Result<String, PromptError> {
    let name = TemplateName::Step3;
    require(name, "category", category)?;
    require(name, "main_narrative", main_narrative)?;
    require(name, "document_text", document_text)?;
    if subnarratives.is_empty() {
        return Err(PromptError::EmptyField { template: name, field: "subnarratives" });
    }
    let list = render_list(subnarratives);
    PromptTemplate::get(name).render(&[
        ("category", category),
        ("main_narrative", main_narrative),
        ("sub_narratives_list_with_explanations", &list),
        ("document_text", document_text),
    ])
}

pub fn render_datagen(
    category: &str,
    sub_narrative: &str,
    explanation: &str,
) -> Result<String, PromptError> {
    let name = TemplateName::Datagen;
    require(name, "category", category)?;
    require(name, "sub_narrative", sub_narrative)?;
    require(name, "explanation", explanation)?;
    PromptTemplate::get(name).render(&[
        ("category", category),
        ("sub_narrative", sub_narrative),
        ("explanation", explanation),
    ])
}

/// Explanation-drafting prompt. The lists are rendered one `- name` per line.
pub fn render_explanation_prompt<M: AsRef<str>, S: AsRef<str>>(
    main_narratives: &[M],
    sub_narratives: &[S],
) -> Result<String, PromptError> {
    let name = TemplateName::Explain;
    if main_narratives.is_empty() {
        return Err(PromptError::EmptyField { template: name, field: "main_narratives" });
    }
    if sub_narratives.is_empty() {
        return Err(PromptError::EmptyField { template: name, field: "sub_narratives" });
    }
    PromptTemplate::get(name).render(&[
        ("main_narratives", &render_names(main_narratives)),
        ("sub_narratives", &render_names(sub_narratives)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_per_template() {
        assert_eq!(PromptTemplate::get(TemplateName::Step1).placeholders(), ["document_text"]);
        assert_eq!(
            PromptTemplate::get(TemplateName::Step3).placeholders(),
            [
                "category",
                "main_narrative",
                "sub_narratives_list_with_explanations",
                "document_text"
            ]
        );
        assert_eq!(
            PromptTemplate::get(TemplateName::Datagen).placeholders(),
            ["category", "sub_narrative", "explanation"]
        );
    }

    #[test]
    fn step1_substitutes_document() {
        let p = render_step1("X").unwrap();
        assert!(p.contains("Document Text: X\n"));
        assert!(p.contains("\"Ukraine-Russia War\" or \"Climate Change\""));
    }

    #[test]
    fn braces_in_document_are_literal() {
        let p = render_step1("see {category} and {document_text}").unwrap();
        assert!(p.contains("Document Text: see {category} and {document_text}\n"));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(render_step1("   ").is_err());
        let none: [(&str, &str); 0] = [];
        assert!(render_step2("Climate Change", &none, "d").is_err());
        assert!(render_step3("Climate Change", "M", &none, "d").is_err());
        assert!(render_datagen("Climate Change", "", "e").is_err());
        assert!(render_explanation_prompt::<&str, &str>(&[], &["s"]).is_err());
    }

    #[test]
    fn single_entry_list_is_one_line() {
        let p = render_step2("Climate Change", &[("A", "a thing")], "doc").unwrap();
        assert!(p.contains("explanations:\n\n- A: a thing\n\nDocument Text: doc"));
    }

    #[test]
    fn datagen_keeps_newlines_and_scaffold() {
        let p = render_datagen("Climate Change", "S", "line1\nline2").unwrap();
        assert!(p.contains("Explanation: line1\nline2\n"));
        for i in 1..=5 {
            assert!(p.contains(&format!("Article {i}:")));
        }
    }

    #[test]
    fn unbound_placeholder_reported() {
        let err = PromptTemplate::get(TemplateName::Step2).render(&[("category", "x")]).unwrap_err();
        assert!(matches!(err, PromptError::Unbound { .. }));
    }
}
