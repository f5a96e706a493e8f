use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::index::SearchHit;

pub const NO_CONTEXT_MARKER: &str = "[no context retrieved]";

const PLACEHOLDERS: [&str; 3] = ["{context}", "{question}", "{options}"];

pub const MCQ_TEMPLATE: &str = "\
You are a medical expert. Use the context below if it is relevant to the question.

Context:
{context}

Question: {question}

Options:
{options}

Answer with the letter of the correct option only.
";

pub const YES_NO_MAYBE_TEMPLATE: &str = "\
You are a medical expert. Use the context below if it is relevant to the question.

Context:
{context}

Question: {question}

Options:
{options}

Answer with yes, no, or maybe only.
";

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template {name:?} must contain {placeholder} exactly once (found {count})")]
    Placeholder {
        name: String,
        placeholder: &'static str,
        count: usize,
    },
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: String,
    pub text: String,
}

impl AnswerOption {
    pub fn new(label: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            text: text.into(),
        }
    }
}

pub fn option_labels(options: &[AnswerOption]) -> Vec<String> {
    options.iter().map(|o| o.label.clone()).collect()
}

/// A validated prompt template with `{context}`, `{question}` and
/// `{options}` placeholders, each exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    template: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, template: impl Into<String>) -> Result<Self, TemplateError> {
        let name = name.into();
        let template = template.into();
        for placeholder in PLACEHOLDERS {
            let count = template.matches(placeholder).count();
            if count != 1 {
                return Err(TemplateError::Placeholder {
                    name,
                    placeholder,
                    count,
                });
            }
        }
        Ok(Self { name, template })
    }

    /// Load a template file; its name is the file stem.
    pub fn from_file(path: &Path) -> Result<Self, TemplateError> {
        let template = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        Self::new(name, template)
    }

    pub fn mcq_default() -> Self {
        Self::new("mcq-default", MCQ_TEMPLATE).expect("built-in template is valid")
    }

    pub fn yes_no_maybe_default() -> Self {
        Self::new("yes-no-maybe-default", YES_NO_MAYBE_TEMPLATE).expect("built-in template is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn text(&self) -> &str {
        &self.template
    }
}

pub fn render_context(hits: &[SearchHit]) -> String {
    if hits.is_empty() {
        return NO_CONTEXT_MARKER.to_string();
    }
    hits.iter()
        .map(|h| {
            format!(
                "--- source: {} (chunk {}) ---\n{}",
                h.chunk_ref.doc_id, h.chunk_ref.seq, h.text
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_options(options: &[AnswerOption]) -> String {
    options
        .iter()
        .map(|o| {
            if o.text.eq_ignore_ascii_case(&o.label) {
                o.label.clone()
            } else {
                format!("{}. {}", o.label, o.text)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Fill the template in one pass, so placeholder-like text inside the
/// question or retrieved chunks is never substituted again.
pub fn build_prompt(
    tmpl: &PromptTemplate,
    hits: &[SearchHit],
    question: &str,
    options: Option<&[AnswerOption]>,
) -> String {
    let values = [
        render_context(hits),
        question.to_string(),
        options.map(render_options).unwrap_or_default(),
    ];
    let mut slots: Vec<(usize, usize)> = PLACEHOLDERS
        .iter()
        .enumerate()
        .map(|(i, p)| (tmpl.template.find(p).expect("validated placeholder"), i))
        .collect();
    slots.sort_unstable();

    let mut out = String::with_capacity(tmpl.template.len() + values.iter().map(String::len).sum::<usize>());
    let mut cursor = 0;
    for (pos, i) in slots {
        out.push_str(&tmpl.template[cursor..pos]);
        out.push_str(&values[i]);
        cursor = pos + PLACEHOLDERS[i].len();
    }
    out.push_str(&tmpl.template[cursor..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::ChunkRef;

    fn hit(doc: &str, seq: usize, text: &str) -> SearchHit {
        SearchHit {
            chunk_ref: ChunkRef {
                doc_id: doc.into(),
                seq,
                start_char: 0,
            },
            text: text.into(),
            score: 0.5,
        }
    }

    fn abcd() -> Vec<AnswerOption> {
        ["A", "B", "C", "D"]
            .iter()
            .map(|l| AnswerOption::new(*l, format!("option {l}")))
            .collect()
    }

    #[test]
    fn template_validation() {
        assert!(PromptTemplate::new("t", "{context}{question}{options}").is_ok());
        assert!(PromptTemplate::new("t", "{context}{question}").is_err());
        assert!(PromptTemplate::new("t", "{context}{context}{question}{options}").is_err());
    }

    #[test]
    fn zero_hits_uses_marker() {
        let p = build_prompt(&PromptTemplate::mcq_default(), &[], "Q?", None);
        assert!(p.contains(NO_CONTEXT_MARKER));
    }

    #[test]
    fn hits_and_options_are_rendered() {
        let hits = [hit("cardio.txt", 3, "first passage"), hit("renal.md", 0, "second passage")];
        let p = build_prompt(&PromptTemplate::mcq_default(), &hits, "Which?", Some(&abcd()));
        for needle in ["first passage", "second passage", "cardio.txt", "renal.md", "Which?"] {
            assert!(p.contains(needle), "missing {needle}");
        }
        let option_lines = p.lines().filter(|l| l.starts_with(|c| "ABCD".contains(c)) && l[1..].starts_with(". ")).count();
        assert_eq!(option_lines, 4);
    }

    #[test]
    fn open_question_renders_no_options() {
        let t = PromptTemplate::new("t", "[{context}|{question}|{options}]").unwrap();
        assert_eq!(build_prompt(&t, &[], "q", None), format!("[{NO_CONTEXT_MARKER}|q|]"));
    }

    #[test]
    fn substituted_text_is_not_rescanned() {
        let t = PromptTemplate::new("t", "{question}/{context}/{options}").unwrap();
        let p = build_prompt(&t, &[hit("d", 0, "{options}")], "{context}", None);
        assert_eq!(p, "{context}/--- source: d (chunk 0) ---\n{options}/");
    }

    #[test]
    fn yes_no_options_render_bare() {
        let opts: Vec<_> = ["yes", "no", "maybe"].iter().map(|l| AnswerOption::new(*l, *l)).collect();
        assert_eq!(render_options(&opts), "yes\nno\nmaybe");
    }
}
