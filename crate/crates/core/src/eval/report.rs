//! Table rows and pairwise significance tests computed from run records.
//! Everything here is a pure function of its inputs, and every output
//! format is byte-deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, DEFAULT_BOOTSTRAP_SEED, DEFAULT_RESAMPLES};
use super::ci::{wald_ci, wilson_ci, Z_95};
use super::record::RunRecord;
use super::score::{score_predictions, Averaging, UNPARSED_LABEL};
use super::wilcoxon::{mcnemar, wilcoxon_signed_rank, McNemarResult, WilcoxonResult};
use super::EvalError;
use crate::energy::{co2_grams, ppw, round2, CarbonIntensityTable, EnergySource};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    #[default]
    Wald,
    Wilson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub ci: CiMethod,
    pub z: f64,
    pub averaging: Averaging,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            ci: CiMethod::Wald,
            z: Z_95,
            averaging: Averaging::Macro,
            bootstrap_resamples: DEFAULT_RESAMPLES,
            bootstrap_seed: DEFAULT_BOOTSTRAP_SEED,
        }
    }
}

/// One table row. Fractions are in [0, 1]; formatting to percent happens
/// only in the markdown output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub model_name: String,
    pub n: usize,
    pub correct: usize,
    pub unparsed: usize,
    pub errored: usize,
    pub accuracy: f64,
    pub accuracy_ci_lo: f64,
    pub accuracy_ci_hi: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f1_ci_lo: Option<f64>,
    pub f1_ci_hi: Option<f64>,
    /// Mean per-item latency in seconds, over items that did not error.
    pub latency_s: f64,
    /// Items per second of run wall time.
    pub throughput_qps: f64,
    pub wall_time_s: f64,
    pub cpu_kwh: f64,
    pub gpu_kwh: f64,
    pub total_kwh: f64,
    pub region: String,
    pub co2_g: f64,
    /// `None` when the run consumed no measurable energy.
    pub ppw: Option<f64>,
    pub energy_source: EnergySource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum PairCell {
    Comparable {
        wilcoxon: WilcoxonResult,
        mcnemar: McNemarResult,
        significant: bool,
    },
    /// The two runs were not scored on the same item set.
    Incomparable,
}

impl PairCell {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            PairCell::Comparable { wilcoxon, .. } => Some(wilcoxon.p_two_sided),
            PairCell::Incomparable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<PairCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<PairwiseMatrix>,
}

fn proportion_ci(p: f64, n: usize, opts: &ReportOptions) -> (f64, f64) {
    match opts.ci {
        CiMethod::Wald => wald_ci(p, n, opts.z),
        CiMethod::Wilson => wilson_ci(p, n, opts.z),
    }
}

/// Averaged F1 over the labels present in a resample, from label ids.
fn f1_of(gold: &[usize], pred: &[usize], sel: &[usize], labels: usize, averaging: Averaging) -> f64 {
    let mut tp = vec![0usize; labels];
    let mut g = vec![0usize; labels];
    let mut p = vec![0usize; labels];
    let mut correct = 0;
    for &i in sel {
        g[gold[i]] += 1;
        p[pred[i]] += 1;
        if gold[i] == pred[i] {
            tp[gold[i]] += 1;
            correct += 1;
        }
    }
    if averaging == Averaging::Micro {
        return correct as f64 / sel.len() as f64;
    }
    let mut sum = 0.0;
    let mut k = 0;
    for l in 0..labels {
        if g[l] == 0 && p[l] == 0 {
            continue;
        }
        k += 1;
        let prec = if p[l] == 0 { 0.0 } else { tp[l] as f64 / p[l] as f64 };
        let rec = if g[l] == 0 { 0.0 } else { tp[l] as f64 / g[l] as f64 };
        if prec + rec > 0.0 {
            sum += 2.0 * prec * rec / (prec + rec);
        }
    }
    if k == 0 {
        0.0
    } else {
        sum / k as f64
    }
}

fn intern<'a>(ids: &mut BTreeMap<&'a str, usize>, label: &'a str) -> usize {
    let next = ids.len();
    *ids.entry(label).or_insert(next)
}

fn f1_bootstrap(run: &RunRecord, opts: &ReportOptions) -> Option<(f64, f64)> {
    let mut ids = BTreeMap::new();
    let gold: Vec<usize> = run.items.iter().map(|i| intern(&mut ids, &i.gold)).collect();
    let pred: Vec<usize> = run
        .items
        .iter()
        .map(|i| intern(&mut ids, i.predicted.as_deref().unwrap_or(UNPARSED_LABEL)))
        .collect();
    let labels = ids.len();
    bootstrap_ci(run.items.len(), opts.bootstrap_resamples, opts.bootstrap_seed, 0.95, |sel| {
        f1_of(&gold, &pred, sel, labels, opts.averaging)
    })
}

pub fn metrics_row(run: &RunRecord, table: &CarbonIntensityTable, opts: &ReportOptions) -> Result<MetricsRow, EvalError> {
    let n = run.items.len();
    let gold: Vec<&str> = run.items.iter().map(|i| i.gold.as_str()).collect();
    let pred: Vec<Option<&str>> = run.items.iter().map(|i| i.predicted.as_deref()).collect();
    let scores = score_predictions(&gold, &pred, opts.averaging);
    let (ci_lo, ci_hi) = proportion_ci(scores.accuracy, n, opts);
    let f1_ci = f1_bootstrap(run, opts);

    let answered: Vec<f64> = run.items.iter().filter(|i| !i.errored).map(|i| i.latency_ms).collect();
    let latency_s = if answered.is_empty() {
        0.0
    } else {
        answered.iter().sum::<f64>() / answered.len() as f64 / 1000.0
    };
    let throughput_qps = if run.wall_time_s > 0.0 { n as f64 / run.wall_time_s } else { 0.0 };

    let t = &run.totals;
    let intensity = table.intensity(&t.region)?;
    let total_kwh = t.cpu_kwh + t.gpu_kwh;
    Ok(MetricsRow {
        run_id: run.run_id.clone(),
        model_name: run.model_name.clone(),
        n,
        correct: scores.correct,
        unparsed: run.unparsed_count,
        errored: run.errored_count,
        accuracy: scores.accuracy,
        accuracy_ci_lo: ci_lo,
        accuracy_ci_hi: ci_hi,
        precision: scores.precision,
        recall: scores.recall,
        f1: scores.f1,
        f1_ci_lo: f1_ci.map(|c| c.0),
        f1_ci_hi: f1_ci.map(|c| c.1),
        latency_s,
        throughput_qps,
        wall_time_s: run.wall_time_s,
        cpu_kwh: t.cpu_kwh,
        gpu_kwh: t.gpu_kwh,
        total_kwh,
        region: t.region.clone(),
        co2_g: co2_grams(total_kwh, intensity),
        ppw: ppw(scores.accuracy, total_kwh).ok(),
        energy_source: t.source,
    })
}

fn correctness_by_id(run: &RunRecord) -> Option<BTreeMap<&str, bool>> {
    let mut m = BTreeMap::new();
    for it in &run.items {
        if m.insert(it.id.as_str(), it.correct).is_some() {
            // Duplicate ids cannot be paired unambiguously.
            return None;
        }
    }
    Some(m)
}

/// Wilcoxon signed-rank (with McNemar alongside) on per-item correctness,
/// paired by item id. Runs over different item sets are incomparable.
pub fn compare_runs(a: &RunRecord, b: &RunRecord) -> Result<PairCell, EvalError> {
    let (Some(ma), Some(mb)) = (correctness_by_id(a), correctness_by_id(b)) else {
        return Ok(PairCell::Incomparable);
    };
    if ma.keys().collect::<BTreeSet<_>>() != mb.keys().collect::<BTreeSet<_>>() {
        return Ok(PairCell::Incomparable);
    }
    let xa: Vec<bool> = ma.values().copied().collect();
    let xb: Vec<bool> = mb.values().copied().collect();
    let fa: Vec<f64> = xa.iter().map(|&c| f64::from(u8::from(c))).collect();
    let fb: Vec<f64> = xb.iter().map(|&c| f64::from(u8::from(c))).collect();
    let wilcoxon = wilcoxon_signed_rank(&fa, &fb)?;
    Ok(PairCell::Comparable {
        significant: wilcoxon.p_two_sided < SIGNIFICANCE_LEVEL,
        mcnemar: mcnemar(&xa, &xb)?,
        wilcoxon,
    })
}

pub fn pairwise_matrix(runs: &[RunRecord]) -> Result<PairwiseMatrix, EvalError> {
    let mut cells = Vec::with_capacity(runs.len());
    for a in runs {
        let mut row = Vec::with_capacity(runs.len());
        for b in runs {
            row.push(compare_runs(a, b)?);
        }
        cells.push(row);
    }
    Ok(PairwiseMatrix {
        labels: runs.iter().map(|r| r.model_name.clone()).collect(),
        cells,
    })
}

/// One row per run, in input order, plus the pairwise matrix when
/// `compare` is set.
pub fn emit_report(
    runs: &[RunRecord],
    table: &CarbonIntensityTable,
    opts: &ReportOptions,
    compare: bool,
) -> Result<MetricsReport, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let rows = runs
        .iter()
        .map(|r| metrics_row(r, table, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let pairwise = if compare { Some(pairwise_matrix(runs)?) } else { None };
    Ok(MetricsReport { rows, pairwise })
}

const CSV_HEADER: [&str; 24] = [
    "run_id",
    "model_name",
    "n",
    "correct",
    "unparsed",
    "errored",
    "accuracy",
    "accuracy_ci_lo",
    "accuracy_ci_hi",
    "precision",
    "recall",
    "f1",
    "f1_ci_lo",
    "f1_ci_hi",
    "latency_s",
    "throughput_qps",
    "wall_time_s",
    "cpu_kwh",
    "gpu_kwh",
    "total_kwh",
    "region",
    "co2_g",
    "ppw",
    "energy_source",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn source_name(s: EnergySource) -> &'static str {
    match s {
        EnergySource::Measured => "measured",
        EnergySource::Synthetic => "synthetic",
        EnergySource::EstimatedRemote => "estimated-remote",
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

fn align(table: &[Vec<String>]) -> String {
    let cols = table[0].len();
    let width: Vec<usize> = (0..cols)
        .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0).max(3))
        .collect();
    let line = |r: &[String]| {
        let mut s = String::from("|");
        for (c, cell) in r.iter().enumerate() {
            let pad = width[c] - cell.chars().count();
            let _ = write!(s, " {cell}{} |", " ".repeat(pad));
        }
        s.push('\n');
        s
    };
    let mut out = line(&table[0]);
    out.push('|');
    for w in &width {
        let _ = write!(out, " {} |", "-".repeat(*w));
    }
    out.push('\n');
    for r in &table[1..] {
        out.push_str(&line(r));
    }
    out
}

impl MetricsReport {
    /// Full-precision rows as CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.run_id.clone(),
                r.model_name.clone(),
                r.n.to_string(),
                r.correct.to_string(),
                r.unparsed.to_string(),
                r.errored.to_string(),
                r.accuracy.to_string(),
                r.accuracy_ci_lo.to_string(),
                r.accuracy_ci_hi.to_string(),
                r.precision.to_string(),
                r.recall.to_string(),
                r.f1.to_string(),
                opt(r.f1_ci_lo),
                opt(r.f1_ci_hi),
                r.latency_s.to_string(),
                r.throughput_qps.to_string(),
                r.wall_time_s.to_string(),
                r.cpu_kwh.to_string(),
                r.gpu_kwh.to_string(),
                r.total_kwh.to_string(),
                r.region.clone(),
                r.co2_g.to_string(),
                opt(r.ppw),
                source_name(r.energy_source).to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// The pairwise matrix as CSV (p-values; empty for incomparable).
    pub fn pairwise_csv(&self) -> Option<String> {
        let m = self.pairwise.as_ref()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(m.labels.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, row) in m.labels.iter().zip(&m.cells) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|c| opt(c.p_value())));
            w.write_record(&rec).expect("in-memory write");
        }
        Some(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned markdown in the layout of the published results table, with
    /// the pairwise matrix below it when present.
    pub fn to_markdown(&self) -> String {
        let mut t = vec![[
            "Model",
            "Latency (s/Q)",
            "Throughput (Q/s)",
            "Accuracy [95% CI]",
            "Precision",
            "Recall",
            "F1 [95% CI]",
            "GPU kWh",
            "CPU kWh",
            "Total kWh",
            "CO2 (g)",
            "PPW",
        ]
        .map(String::from)
        .to_vec()];
        for r in &self.rows {
            let remote = r.energy_source == EnergySource::EstimatedRemote;
            let f1 = match (r.f1_ci_lo, r.f1_ci_hi) {
                (Some(lo), Some(hi)) => format!("{} [{}, {}]", pct(r.f1), pct(lo), pct(hi)),
                _ => pct(r.f1),
            };
            t.push(vec![
                r.model_name.clone(),
                format!("{:.2}", r.latency_s),
                format!("{:.2}", r.throughput_qps),
                format!("{} [{}, {}]", pct(r.accuracy), pct(r.accuracy_ci_lo), pct(r.accuracy_ci_hi)),
                pct(r.precision),
                pct(r.recall),
                f1,
                if remote { "-".into() } else { format!("{:.4}", r.gpu_kwh) },
                if remote { "-".into() } else { format!("{:.4}", r.cpu_kwh) },
                format!("{:.4}", r.total_kwh),
                format!("{:.1}", r.co2_g),
                r.ppw.map(|p| format!("{:.2}", round2(p))).unwrap_or_else(|| "n/a".into()),
            ]);
        }
        let mut out = align(&t);
        if let Some(m) = &self.pairwise {
            out.push_str("\nPairwise Wilcoxon signed-rank p-values (* p < 0.05):\n\n");
            let mut header = vec!["".to_string()];
            header.extend((1..=m.labels.len()).map(|i| format!("({i})")));
            let mut t = vec![header];
            for (i, (label, row)) in m.labels.iter().zip(&m.cells).enumerate() {
                let mut r = vec![format!("({}) {label}", i + 1)];
                r.extend(row.iter().map(|c| match c {
                    PairCell::Comparable { wilcoxon, significant, .. } => {
                        format!("{:.4}{}", wilcoxon.p_two_sided, if *significant { "*" } else { "" })
                    }
                    PairCell::Incomparable => "incomparable".into(),
                }));
                t.push(r);
            }
            out.push_str(&align(&t));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyReport;
    use crate::eval::record::{ItemOutcome, RunConfigSnapshot, RUN_SCHEMA_VERSION};
    use crate::rag::Attribution;

    pub(crate) fn synthetic_run(model: &str, n: usize, correct: usize, kwh: f64, region: &str, wall_s: f64) -> RunRecord {
        let items = (0..n)
            .map(|i| {
                let ok = i < correct;
                ItemOutcome {
                    id: format!("q{i:04}"),
                    gold: "A".into(),
                    predicted: Some(if ok { "A" } else { "B" }.into()),
                    correct: ok,
                    latency_ms: wall_s * 1000.0 / n as f64,
                    energy_wh: kwh * 1000.0 / n as f64,
                    errored: false,
                    error: None,
                }
            })
            .collect();
        RunRecord {
            schema_version: RUN_SCHEMA_VERSION,
            run_id: format!("{model}-run"),
            model_name: model.into(),
            created_at: "2024-01-01T00:00:00Z".into(),
            config: RunConfigSnapshot {
                top_k: 4,
                template: "mcq".into(),
                seed: 42,
                region: region.into(),
                embedder_url: "http://127.0.0.1:11434".into(),
                embedder_model: "e".into(),
                generator_url: "http://127.0.0.1:11434".into(),
                dataset_kind: None,
                dataset_path: None,
                n,
                energy_backend: EnergySource::Synthetic,
                attribution: Attribution::PerQuery,
            },
            items,
            totals: EnergyReport::new(kwh * 0.2, kwh * 0.8, region, 430.0, EnergySource::Synthetic),
            unparsed_count: 0,
            errored_count: 0,
            wall_time_s: wall_s,
        }
    }

    fn quick() -> ReportOptions {
        ReportOptions {
            bootstrap_resamples: 200,
            ..ReportOptions::default()
        }
    }

    #[test]
    fn reported_row_arithmetic() {
        let run = synthetic_run("llama3.1:8b", 1000, 585, 1.1, "GR", 3030.0);
        let row = metrics_row(&run, &CarbonIntensityTable::default(), &quick()).unwrap();
        assert!((row.accuracy - 0.585).abs() < 1e-12);
        assert!((row.accuracy_ci_lo * 100.0 - 55.44).abs() < 0.01);
        assert!((row.accuracy_ci_hi * 100.0 - 61.55).abs() < 0.01);
        assert!((row.co2_g - 473.0).abs() < 0.05);
        assert!((row.latency_s - 3.03).abs() < 1e-9);
        assert_eq!(round2(row.throughput_qps), 0.33);
        assert!((row.throughput_qps * row.wall_time_s - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn identical_runs_are_not_significant() {
        let run = synthetic_run("m", 50, 30, 0.1, "GR", 10.0);
        let rep = emit_report(&[run.clone(), run], &CarbonIntensityTable::default(), &quick(), true).unwrap();
        let m = rep.pairwise.unwrap();
        for row in &m.cells {
            for c in row {
                assert_eq!(c.p_value(), Some(1.0));
                assert!(matches!(c, PairCell::Comparable { significant: false, .. }));
            }
        }
    }

    #[test]
    fn different_item_sets_are_incomparable() {
        let a = synthetic_run("a", 20, 10, 0.1, "GR", 10.0);
        let mut b = synthetic_run("b", 20, 10, 0.1, "GR", 10.0);
        b.items[0].id = "other".into();
        assert_eq!(compare_runs(&a, &b).unwrap(), PairCell::Incomparable);
        let rep = emit_report(&[a, b], &CarbonIntensityTable::default(), &quick(), true).unwrap();
        assert!(rep.to_markdown().contains("incomparable"));
    }

    #[test]
    fn zero_energy_has_no_ppw() {
        let run = synthetic_run("m", 10, 5, 0.0, "GR", 1.0);
        let row = metrics_row(&run, &CarbonIntensityTable::default(), &quick()).unwrap();
        assert_eq!(row.ppw, None);
        assert!(emit_report(&[run], &CarbonIntensityTable::default(), &quick(), false)
            .unwrap()
            .to_markdown()
            .contains("n/a"));
    }

    #[test]
    fn unknown_region_is_error() {
        let run = synthetic_run("m", 10, 5, 0.1, "XX", 1.0);
        assert!(metrics_row(&run, &CarbonIntensityTable::default(), &quick()).is_err());
    }

    #[test]
    fn outputs_are_deterministic() {
        let runs = [
            synthetic_run("a", 40, 25, 0.2, "GR", 30.0),
            synthetic_run("b", 40, 15, 0.3, "DE", 20.0),
        ];
        let t = CarbonIntensityTable::default();
        let r1 = emit_report(&runs, &t, &quick(), true).unwrap();
        let r2 = emit_report(&runs, &t, &quick(), true).unwrap();
        assert_eq!(r1.to_csv(), r2.to_csv());
        assert_eq!(r1.to_json(), r2.to_json());
        assert_eq!(r1.to_markdown(), r2.to_markdown());
        assert_eq!(r1.to_csv().lines().count(), 3);
    }

    #[test]
    fn bootstrap_f1_matches_scorer_on_full_sample() {
        let mut run = synthetic_run("m", 30, 20, 0.1, "GR", 1.0);
        run.items[25].predicted = None;
        run.items[25].correct = false;
        let gold: Vec<&str> = run.items.iter().map(|i| i.gold.as_str()).collect();
        let pred: Vec<Option<&str>> = run.items.iter().map(|i| i.predicted.as_deref()).collect();
        let s = score_predictions(&gold, &pred, Averaging::Macro);
        let mut ids = BTreeMap::new();
        let g: Vec<usize> = run.items.iter().map(|i| intern(&mut ids, &i.gold)).collect();
        let p: Vec<usize> = run
            .items
            .iter()
            .map(|i| intern(&mut ids, i.predicted.as_deref().unwrap_or(UNPARSED_LABEL)))
            .collect();
        let all: Vec<usize> = (0..30).collect();
        assert!((f1_of(&g, &p, &all, ids.len(), Averaging::Macro) - s.f1).abs() < 1e-12);
    }
}
