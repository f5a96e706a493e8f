use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ecorag_cli::commands::parse_option;
use ecorag_cli::config::CONFIG_ENV;
use ecorag_cli::{
    cmd_ask, cmd_bench, cmd_index, cmd_report, server, AppConfig, AskArgs, BenchArgs, CliError, IndexArgs,
    ReportArgs, ReportFormat,
};
use ecorag_core::eval::{Averaging, CiMethod, DatasetKind, ReportOptions, DEFAULT_BOOTSTRAP_SEED, DEFAULT_RESAMPLES};

#[derive(Parser)]
#[command(name = "ecorag", version, about = "Local RAG question answering with energy and carbon accounting")]
struct Cli {
    /// Configuration file (TOML, or JSON by extension).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct StatsFlags {
    #[arg(long, default_value = "wald", value_parser = parse_ci)]
    ci: CiMethod,
    #[arg(long, default_value = "macro", value_parser = parse_averaging)]
    averaging: Averaging,
    /// Bootstrap resamples for the F1 interval.
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_SEED)]
    bootstrap_seed: u64,
}

impl StatsFlags {
    fn options(&self) -> ReportOptions {
        ReportOptions {
            ci: self.ci,
            averaging: self.averaging,
            bootstrap_resamples: self.resamples,
            bootstrap_seed: self.bootstrap_seed,
            ..ReportOptions::default()
        }
    }
}

fn parse_ci(s: &str) -> Result<CiMethod, String> {
    match s {
        "wald" => Ok(CiMethod::Wald),
        "wilson" => Ok(CiMethod::Wilson),
        _ => Err("expected wald or wilson".into()),
    }
}

fn parse_averaging(s: &str) -> Result<Averaging, String> {
    match s {
        "macro" => Ok(Averaging::Macro),
        "micro" => Ok(Averaging::Micro),
        _ => Err("expected macro or micro".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Chunk and embed a corpus directory into an index file.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Output path (default: configured index_path).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer one question against the index.
    Ask {
        question: String,
        /// Answer option as LABEL=TEXT; repeat for each option.
        #[arg(long = "option", value_parser = parse_option)]
        options: Vec<ecorag_core::rag::AnswerOption>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Print the full answer as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a benchmark dataset and write a run record.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        kind: DatasetKind,
        /// Number of items to sample (default: all).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        stats: StatsFlags,
    },
    /// Tabulate run records; --compare adds pairwise significance tests.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        compare: bool,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        stats: StatsFlags,
    },
    /// Serve the HTTP API (and web UI assets).
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        allow_non_loopback: bool,
        /// Allow overlapping asks (session-level energy attribution only).
        #[arg(long)]
        concurrent: bool,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

async fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Index { corpus, out } => {
            cmd_index(&cfg, &IndexArgs { corpus, out }, &mut stdout).await?;
        }
        Command::Ask {
            question,
            options,
            top_k,
            json,
        } => {
            let args = AskArgs {
                question,
                options,
                top_k,
                json,
            };
            cmd_ask(&cfg, &args, &mut stdout).await?;
        }
        Command::Bench {
            dataset,
            kind,
            n,
            seed,
            out,
            stats,
        } => {
            let args = BenchArgs {
                dataset,
                kind,
                n,
                seed,
                out,
                report: stats.options(),
            };
            cmd_bench(&cfg, &args, &mut stdout).await?;
        }
        Command::Report {
            runs,
            compare,
            format,
            out_dir,
            stats,
        } => {
            let args = ReportArgs {
                runs,
                compare,
                format,
                out_dir,
                options: stats.options(),
            };
            cmd_report(&cfg, &args, &mut stdout)?;
        }
        Command::Serve {
            bind,
            port,
            allow_non_loopback,
            concurrent,
            static_dir,
        } => {
            drop(stdout);
            let s = &mut cfg.server;
            s.bind = bind.unwrap_or(std::mem::take(&mut s.bind));
            s.port = port.unwrap_or(s.port);
            s.allow_non_loopback |= allow_non_loopback;
            s.concurrent |= concurrent;
            if static_dir.is_some() {
                s.static_dir = static_dir;
            }
            server::serve(&cfg).await?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(ecorag_cli::EXIT_FAILURE);
        }
    };
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
