use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime};

use chrono::{DateTime, SecondsFormat, Utc};
use ecorag_core::corpus::{chunk_documents, load_documents, CorpusError, Document};
use ecorag_core::embed::HttpEmbedder;
use ecorag_core::energy::EnergyMonitor;
use ecorag_core::eval::{
    emit_report, load_dataset, run_benchmark, sample_questions, DatasetKind, EvalError, MetricsReport,
    ReportOptions, RunConfigSnapshot, RunRecord, YES_NO_MAYBE,
};
use ecorag_core::index::{build_index, load_index, save_index, IndexError, IndexMetadata};
use ecorag_core::rag::{AnswerOption, Attribution, HttpGenerator, PromptTemplate};
use ecorag_core::{RagAnswer, RagEngine, VectorIndex};

use crate::config::AppConfig;
use crate::{CliError, EXIT_PROVIDER};

/// Bench runs with more than this fraction of errored items fail.
pub const MAX_ERRORED_FRACTION: f64 = 0.10;

fn io_err(what: &str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::failure(format!("{what} {}: {e}", path.display()))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::failure(format!("writing output: {e}"))
}

/// `SOURCE_DATE_EPOCH` when set, else the newest source modification time,
/// so rebuilding an unchanged corpus yields an identical file.
fn corpus_timestamp(docs: &[Document]) -> String {
    let from_env = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    let t = from_env.unwrap_or_else(|| {
        let newest = docs
            .iter()
            .filter_map(|d| std::fs::metadata(&d.source_path).and_then(|m| m.modified()).ok())
            .max()
            .unwrap_or(SystemTime::UNIX_EPOCH);
        DateTime::<Utc>::from(newest)
    });
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub(crate) fn load_engine_index(cfg: &AppConfig) -> Result<Arc<VectorIndex>, CliError> {
    if !cfg.index_path.is_file() {
        return Err(CliError::input(format!(
            "index file {} not found (run `ecorag index` first)",
            cfg.index_path.display()
        )));
    }
    match load_index(&cfg.index_path) {
        Ok(i) => Ok(Arc::new(i)),
        Err(e @ (IndexError::Format(_) | IndexError::Corruption(_))) => {
            Err(CliError::input(format!("{}: {e}", cfg.index_path.display())))
        }
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn default_template(options: Option<&[AnswerOption]>) -> PromptTemplate {
    let yes_no_maybe = options.is_some_and(|o| {
        o.len() == YES_NO_MAYBE.len() && o.iter().zip(YES_NO_MAYBE).all(|(a, l)| a.label == l)
    });
    if yes_no_maybe {
        PromptTemplate::yes_no_maybe_default()
    } else {
        PromptTemplate::mcq_default()
    }
}

pub(crate) fn template(cfg: &AppConfig, fallback: PromptTemplate) -> Result<PromptTemplate, CliError> {
    match &cfg.prompt_template_path {
        Some(p) => PromptTemplate::from_file(p).map_err(CliError::input),
        None => Ok(fallback),
    }
}

/// Wire an engine from the configuration.
pub fn build_engine(
    cfg: &AppConfig,
    index: Arc<VectorIndex>,
    monitor: Arc<EnergyMonitor>,
    template: PromptTemplate,
) -> Result<RagEngine, CliError> {
    if index.metadata().embedding_model != cfg.embedder.model_name {
        log::warn!(
            "index was built with embedder {:?} but {:?} is configured",
            index.metadata().embedding_model,
            cfg.embedder.model_name
        );
    }
    let embedder = HttpEmbedder::new(cfg.embedder.clone()).map_err(CliError::input)?;
    let generator = HttpGenerator::new(cfg.generator.clone()).map_err(CliError::input)?;
    Ok(RagEngine::new(
        index,
        Arc::new(embedder),
        Arc::new(generator),
        template,
        cfg.top_k,
        monitor,
    ))
}

#[derive(Debug, Clone)]
pub struct IndexArgs {
    pub corpus: PathBuf,
    /// Defaults to the configured `index_path`.
    pub out: Option<PathBuf>,
}

pub async fn cmd_index(cfg: &AppConfig, args: &IndexArgs, out: &mut dyn Write) -> Result<VectorIndex, CliError> {
    let started = Instant::now();
    let extensions: BTreeSet<String> = cfg.corpus_extensions.iter().cloned().collect();
    let (docs, mut ingestion) = load_documents(&args.corpus, &extensions).map_err(|e| match e {
        CorpusError::Walk(_) => CliError::failure(e),
        _ => CliError::input(e),
    })?;
    let chunk_cfg = cfg.chunk_config()?;
    let chunks = chunk_documents(&docs, chunk_cfg).map_err(CliError::input)?;
    ingestion.chunk_count = chunks.len();

    let embedder = HttpEmbedder::new(cfg.embedder.clone()).map_err(CliError::input)?;
    let monitor = cfg.start_monitor()?;
    let begin = monitor.mark();
    let meta = IndexMetadata {
        embedding_model: cfg.embedder.model_name.clone(),
        chunk_size: chunk_cfg.chunk_size,
        overlap: chunk_cfg.overlap,
        created_at: corpus_timestamp(&docs),
        corpus_fingerprint: String::new(),
    };
    let index = build_index(&chunks, &embedder, cfg.embed_parallelism, meta).await?;
    let energy = monitor.energy_between(begin, monitor.mark());
    monitor.stop();

    let path = args.out.clone().unwrap_or_else(|| cfg.index_path.clone());
    save_index(&index, &path).map_err(|e| io_err("cannot write index", &path, e))?;

    let ingestion_json = serde_json::to_string(&ingestion).expect("ingestion report serializes");
    writeln!(out, "ingestion: {ingestion_json}").map_err(out_err)?;
    for s in &ingestion.skipped {
        writeln!(out, "skipped: {} ({})", s.path, s.reason).map_err(out_err)?;
    }
    writeln!(out, "chunks: {}", index.len()).map_err(out_err)?;
    writeln!(out, "dim: {}", index.dim()).map_err(out_err)?;
    writeln!(out, "elapsed_s: {:.3}", started.elapsed().as_secs_f64()).map_err(out_err)?;
    writeln!(
        out,
        "energy_wh: {} ({}, co2_g {})",
        energy.total_wh(),
        serde_json::to_value(energy.source).unwrap().as_str().unwrap_or_default(),
        energy.co2_g
    )
    .map_err(out_err)?;
    writeln!(out, "wrote: {}", path.display()).map_err(out_err)?;
    Ok(index)
}

#[derive(Debug, Clone)]
pub struct AskArgs {
    pub question: String,
    pub options: Vec<AnswerOption>,
    pub top_k: Option<usize>,
    pub json: bool,
}

/// Parse `L=text` (or a bare `L`) into an answer option.
pub fn parse_option(raw: &str) -> Result<AnswerOption, String> {
    let (label, text) = match raw.split_once('=') {
        Some((l, t)) => (l.trim(), t.trim()),
        None => (raw.trim(), raw.trim()),
    };
    if label.is_empty() {
        return Err(format!("option {raw:?} has an empty label"));
    }
    Ok(AnswerOption::new(label, text))
}

pub async fn cmd_ask(cfg: &AppConfig, args: &AskArgs, out: &mut dyn Write) -> Result<RagAnswer, CliError> {
    if args.question.trim().is_empty() {
        return Err(CliError::input("question must not be empty"));
    }
    let options = (!args.options.is_empty()).then_some(args.options.as_slice());
    let index = load_engine_index(cfg)?;
    let monitor = cfg.start_monitor()?;
    let engine = build_engine(cfg, index, monitor.clone(), template(cfg, default_template(options))?)?;
    let answer = engine
        .ask_with_top_k(&args.question, options, args.top_k.unwrap_or(cfg.top_k))
        .await?;
    monitor.stop();

    if args.json {
        let text = serde_json::to_string_pretty(&answer).expect("answer serializes");
        writeln!(out, "{text}").map_err(out_err)?;
        return Ok(answer);
    }
    writeln!(out, "answer: {}", answer.raw_text.trim()).map_err(out_err)?;
    if options.is_some() {
        writeln!(out, "choice: {}", answer.parsed_choice.as_deref().unwrap_or("(unparsed)")).map_err(out_err)?;
    }
    writeln!(out, "sources:").map_err(out_err)?;
    for h in &answer.sources {
        writeln!(out, "  {} (chunk {})  score {:.4}", h.chunk_ref.doc_id, h.chunk_ref.seq, h.score).map_err(out_err)?;
    }
    writeln!(out, "latency_ms: {}", answer.latency_ms).map_err(out_err)?;
    writeln!(out, "energy_wh: {}", answer.energy_wh).map_err(out_err)?;
    writeln!(out, "co2_g: {}", answer.co2_g).map_err(out_err)?;
    Ok(answer)
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub dataset: PathBuf,
    pub kind: DatasetKind,
    /// Items to sample; all when `None`.
    pub n: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub report: ReportOptions,
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Io { .. } => CliError::input(e),
        EvalError::NoItems { .. } | EvalError::Format { .. } | EvalError::SampleSize { .. } => CliError::input(e),
        EvalError::Energy(_) => CliError::input(e),
        EvalError::NoRuns | EvalError::LengthMismatch { .. } => CliError::failure(e),
    }
}

/// Sample, ask every item in order, write the run record and print its
/// table row. Fails (after writing the record) when more than 10% of the
/// items errored.
pub async fn cmd_bench(cfg: &AppConfig, args: &BenchArgs, out: &mut dyn Write) -> Result<RunRecord, CliError> {
    let dataset = load_dataset(&args.dataset, args.kind).map_err(eval_err)?;
    let n = args.n.unwrap_or(dataset.items.len());
    if n == 0 {
        return Err(CliError::input("n must be at least 1"));
    }
    let items = sample_questions(&dataset.items, n, args.seed).map_err(eval_err)?;

    let index = load_engine_index(cfg)?;
    let fallback = match args.kind {
        DatasetKind::Medqa => PromptTemplate::mcq_default(),
        DatasetKind::Pubmedqa => PromptTemplate::yes_no_maybe_default(),
    };
    let monitor = cfg.start_monitor()?;
    let engine = build_engine(cfg, index, monitor.clone(), template(cfg, fallback)?)?;
    let snapshot = RunConfigSnapshot {
        top_k: cfg.top_k,
        template: engine.template().name().to_string(),
        seed: args.seed,
        region: cfg.region.clone(),
        embedder_url: cfg.embedder.base_url.clone(),
        embedder_model: cfg.embedder.model_name.clone(),
        generator_url: cfg.generator.base_url.clone(),
        dataset_kind: Some(args.kind),
        dataset_path: Some(args.dataset.display().to_string()),
        n,
        energy_backend: monitor.source(),
        attribution: Attribution::PerQuery,
    };
    let run = run_benchmark(&engine, &items, snapshot).await;
    monitor.stop();
    run.save(&args.out).map_err(|e| io_err("cannot write run record", &args.out, e))?;

    let report = emit_report(std::slice::from_ref(&run), &cfg.carbon_table()?, &args.report, false).map_err(eval_err)?;
    write!(out, "{}", report.to_markdown()).map_err(out_err)?;
    writeln!(out, "wrote: {}", args.out.display()).map_err(out_err)?;

    let fraction = run.errored_count as f64 / run.items.len() as f64;
    if fraction > MAX_ERRORED_FRACTION {
        return Err(CliError {
            code: EXIT_PROVIDER,
            message: format!(
                "{} of {} items errored (limit {:.0}%)",
                run.errored_count,
                run.items.len(),
                MAX_ERRORED_FRACTION * 100.0
            ),
        });
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format {other:?} (expected markdown, csv or json)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportArgs {
    pub runs: Vec<PathBuf>,
    pub compare: bool,
    pub format: ReportFormat,
    /// Also write report.{md,csv,json} (and pairwise.csv) here.
    pub out_dir: Option<PathBuf>,
    pub options: ReportOptions,
}

pub fn render(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => report.to_markdown(),
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => match report.pairwise_csv() {
            Some(p) => format!("{}\n{p}", report.to_csv()),
            None => report.to_csv(),
        },
    }
}

pub fn cmd_report(cfg: &AppConfig, args: &ReportArgs, out: &mut dyn Write) -> Result<MetricsReport, CliError> {
    if args.runs.is_empty() {
        return Err(CliError::input("report needs at least one run file"));
    }
    let runs = args
        .runs
        .iter()
        .map(|p| RunRecord::load(p).map_err(CliError::input))
        .collect::<Result<Vec<_>, _>>()?;
    let report = emit_report(&runs, &cfg.carbon_table()?, &args.options, args.compare).map_err(eval_err)?;
    write!(out, "{}", render(&report, args.format)).map_err(out_err)?;

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_err("cannot create", dir, e))?;
        let mut files = vec![
            ("report.md", report.to_markdown()),
            ("report.csv", report.to_csv()),
            ("report.json", report.to_json()),
        ];
        if let Some(p) = report.pairwise_csv() {
            files.push(("pairwise.csv", p));
        }
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| io_err("cannot write", &path, e))?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_syntax() {
        let o = parse_option("B = Metformin").unwrap();
        assert_eq!((o.label.as_str(), o.text.as_str()), ("B", "Metformin"));
        let o = parse_option("yes").unwrap();
        assert_eq!((o.label.as_str(), o.text.as_str()), ("yes", "yes"));
        assert!(parse_option("=x").is_err());
    }

    #[test]
    fn yes_no_maybe_picks_its_template() {
        let opts: Vec<AnswerOption> = YES_NO_MAYBE.iter().map(|l| AnswerOption::new(*l, *l)).collect();
        assert_eq!(default_template(Some(&opts)).name(), "yes-no-maybe-default");
        assert_eq!(default_template(None).name(), "mcq-default");
    }
}
