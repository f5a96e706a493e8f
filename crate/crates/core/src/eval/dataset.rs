//! Loaders for the MedQA (JSON lines) and PubMedQA (keyed JSON object)
//! benchmark formats.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::EvalError;
use crate::rag::AnswerOption;

pub const YES_NO_MAYBE: [&str; 3] = ["yes", "no", "maybe"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Medqa,
    Pubmedqa,
}

impl std::str::FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "medqa" => Ok(Self::Medqa),
            "pubmedqa" => Ok(Self::Pubmedqa),
            other => Err(format!("unknown dataset kind {other:?} (expected medqa or pubmedqa)")),
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Medqa => "medqa",
            Self::Pubmedqa => "pubmedqa",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub question: String,
    pub options: Vec<AnswerOption>,
    pub gold: String,
    pub source_dataset: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_tag: Option<String>,
}

impl McqItem {
    pub fn labels(&self) -> Vec<String> {
        self.options.iter().map(|o| o.label.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Line number (MedQA) or entry key (PubMedQA).
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedDataset {
    pub items: Vec<McqItem>,
    pub rejected: Vec<Rejection>,
}

pub fn load_dataset(path: &Path, kind: DatasetKind) -> Result<LoadedDataset, EvalError> {
    match kind {
        DatasetKind::Medqa => load_medqa(path),
        DatasetKind::Pubmedqa => load_pubmedqa(path),
    }
}

fn read(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn finish(path: &Path, items: Vec<McqItem>, rejected: Vec<Rejection>) -> Result<LoadedDataset, EvalError> {
    for r in &rejected {
        log::warn!("{}: {}: {}", path.display(), r.location, r.reason);
    }
    if items.is_empty() {
        return Err(EvalError::NoItems {
            path: path.display().to_string(),
            rejected: rejected.len(),
        });
    }
    Ok(LoadedDataset { items, rejected })
}

fn medqa_options(v: &Value) -> Result<Vec<AnswerOption>, String> {
    let opts = match v {
        // {"A": "...", "B": "..."}
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| {
                v.as_str()
                    .map(|t| AnswerOption::new(k.clone(), t))
                    .ok_or_else(|| format!("option {k} is not a string"))
            })
            .collect::<Result<Vec<_>, _>>()?,
        // [{"key": "A", "value": "..."}]
        Value::Array(list) => list
            .iter()
            .map(|o| match (o.get("key").and_then(Value::as_str), o.get("value").and_then(Value::as_str)) {
                (Some(k), Some(t)) => Ok(AnswerOption::new(k, t)),
                _ => Err("option entries need string key and value".to_string()),
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err("options must be an object or a list".into()),
    };
    if opts.len() < 2 {
        return Err(format!("need at least 2 options, found {}", opts.len()));
    }
    Ok(opts)
}

fn medqa_item(line_no: usize, obj: &Map<String, Value>) -> Result<McqItem, String> {
    let question = obj
        .get("question")
        .and_then(Value::as_str)
        .filter(|q| !q.trim().is_empty())
        .ok_or("missing question")?;
    let options = medqa_options(obj.get("options").ok_or("missing options")?)?;
    let gold = obj.get("answer_idx").and_then(Value::as_str).ok_or("missing answer_idx")?;
    if !options.iter().any(|o| o.label == gold) {
        return Err(format!("answer_idx {gold:?} is not among the options"));
    }
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => format!("medqa-{line_no}"),
    };
    Ok(McqItem {
        id,
        question: question.to_string(),
        options,
        gold: gold.to_string(),
        source_dataset: DatasetKind::Medqa,
        difficulty_tag: obj.get("meta_info").and_then(Value::as_str).map(str::to_string),
    })
}

/// One JSON object per line with `question`, `options` (label to text) and
/// `answer_idx` (gold label). Optional `id` and `meta_info` are kept. Bad
/// lines are rejected with their 1-based line number.
pub fn load_medqa(path: &Path) -> Result<LoadedDataset, EvalError> {
    let text = read(path)?;
    let mut items = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(line)
            .map_err(|e| format!("invalid JSON: {e}"))
            .and_then(|v| match v {
                Value::Object(obj) => medqa_item(line_no, &obj),
                _ => Err("line is not a JSON object".into()),
            });
        match parsed {
            Ok(item) => items.push(item),
            Err(reason) => rejected.push(Rejection {
                location: format!("line {line_no}"),
                reason,
            }),
        }
    }
    finish(path, items, rejected)
}

/// A JSON object keyed by PubMed id, each entry holding `QUESTION` and
/// `final_decision`. Abstract contexts (`CONTEXTS`, `LONG_ANSWER`, ...) are
/// dropped: items carry only the question and the yes/no/maybe options.
pub fn load_pubmedqa(path: &Path) -> Result<LoadedDataset, EvalError> {
    let text = read(path)?;
    let root: Map<String, Value> = match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => m,
        Ok(_) => {
            return Err(EvalError::Format {
                path: path.display().to_string(),
                reason: "expected a JSON object keyed by pubid".into(),
            })
        }
        Err(e) => {
            return Err(EvalError::Format {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        }
    };
    let options: Vec<AnswerOption> = YES_NO_MAYBE.iter().map(|l| AnswerOption::new(*l, *l)).collect();
    let mut items = Vec::new();
    let mut rejected = Vec::new();
    for (pubid, entry) in &root {
        let question = entry.get("QUESTION").and_then(Value::as_str).filter(|q| !q.trim().is_empty());
        let decision = entry
            .get("final_decision")
            .and_then(Value::as_str)
            .map(|d| d.trim().to_ascii_lowercase());
        let reject = |reason: String| Rejection {
            location: format!("entry {pubid}"),
            reason,
        };
        match (question, decision) {
            (None, _) => rejected.push(reject("missing QUESTION".into())),
            (_, None) => rejected.push(reject("missing final_decision".into())),
            (Some(_), Some(d)) if !YES_NO_MAYBE.contains(&d.as_str()) => {
                rejected.push(reject(format!("final_decision {d:?} is not yes/no/maybe")))
            }
            (Some(q), Some(d)) => items.push(McqItem {
                id: pubid.clone(),
                question: q.to_string(),
                options: options.clone(),
                gold: d,
                source_dataset: DatasetKind::Pubmedqa,
                difficulty_tag: None,
            }),
        }
    }
    finish(path, items, rejected)
}
