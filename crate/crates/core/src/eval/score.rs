use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Prediction label used for outputs no answer could be parsed from.
pub const UNPARSED_LABEL: &str = "∅";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold items with this label.
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    pub per_label: Vec<LabelScore>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Accuracy plus per-label and averaged precision, recall and F1. Missing
/// predictions count as the [`UNPARSED_LABEL`] class; macro averages run
/// over every label seen in gold or predictions, with 0 for empty
/// denominators.
pub fn score_predictions<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    predicted: &[Option<P>],
    averaging: Averaging,
) -> Scores {
    assert_eq!(gold.len(), predicted.len(), "gold and predictions must pair up");
    #[derive(Default)]
    struct Counts {
        tp: usize,
        gold: usize,
        pred: usize,
    }
    let mut counts: BTreeMap<&str, Counts> = BTreeMap::new();
    let mut correct = 0;
    for (g, p) in gold.iter().zip(predicted) {
        let g = g.as_ref();
        let p = p.as_ref().map(AsRef::as_ref).unwrap_or(UNPARSED_LABEL);
        counts.entry(g).or_default().gold += 1;
        counts.entry(p).or_default().pred += 1;
        if g == p && p != UNPARSED_LABEL {
            correct += 1;
            counts.get_mut(g).unwrap().tp += 1;
        }
    }
    let per_label: Vec<LabelScore> = counts
        .iter()
        .map(|(label, c)| {
            let precision = ratio(c.tp, c.pred);
            let recall = ratio(c.tp, c.gold);
            LabelScore {
                label: label.to_string(),
                precision,
                recall,
                f1: f1(precision, recall),
                support: c.gold,
                predicted: c.pred,
            }
        })
        .collect();

    let n = gold.len();
    let accuracy = ratio(correct, n);
    let (precision, recall, f1_avg) = match averaging {
        Averaging::Macro if !per_label.is_empty() => {
            let k = per_label.len() as f64;
            (
                per_label.iter().map(|l| l.precision).sum::<f64>() / k,
                per_label.iter().map(|l| l.recall).sum::<f64>() / k,
                per_label.iter().map(|l| l.f1).sum::<f64>() / k,
            )
        }
        Averaging::Macro => (0.0, 0.0, 0.0),
        // Every item has exactly one gold and one predicted label, so
        // pooled precision and recall both equal accuracy.
        Averaging::Micro => (accuracy, accuracy, accuracy),
    };
    Scores {
        n,
        correct,
        accuracy,
        precision,
        recall,
        f1: f1_avg,
        averaging,
        per_label,
    }
}
