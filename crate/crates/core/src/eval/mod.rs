//! Benchmark loading, run execution, scoring and significance testing.

mod bootstrap;
mod ci;
mod dataset;
mod record;
mod report;
mod runner;
mod sample;
mod score;
mod wilcoxon;

pub use bootstrap::{bootstrap_ci, DEFAULT_BOOTSTRAP_SEED, DEFAULT_RESAMPLES};
pub use ci::{wald_ci, wilson_ci, Z_95};
pub use dataset::{load_dataset, load_medqa, load_pubmedqa, DatasetKind, LoadedDataset, McqItem, Rejection, YES_NO_MAYBE};
pub use record::{ItemOutcome, RunConfigSnapshot, RunRecord, RUN_SCHEMA_VERSION};
pub use report::{
    compare_runs, emit_report, metrics_row, pairwise_matrix, CiMethod, MetricsReport, MetricsRow, PairCell,
    PairwiseMatrix, ReportOptions, SIGNIFICANCE_LEVEL,
};
pub use runner::{run_benchmark, run_id};
pub use sample::{sample_indices, sample_questions, SplitMix64};
pub use score::{score_predictions, Averaging, LabelScore, Scores, UNPARSED_LABEL};
pub use wilcoxon::{
    exact_p, mcnemar, normal_p, signed_doubled_ranks, wilcoxon_signed_rank, wilcoxon_signed_rank_with, McNemarResult,
    WilcoxonMethod, WilcoxonResult, EXACT_MAX_N,
};

use crate::energy::EnergyError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot sample {requested} items from {available}")]
    SampleSize { requested: usize, available: usize },
    #[error("paired vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no valid items ({rejected} rejected)")]
    NoItems { path: String, rejected: usize },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error("a report needs at least one run")]
    NoRuns,
    #[error(transparent)]
    Energy(#[from] EnergyError),
}
