//! The `ecorag` operator surface: index, ask, bench, report and serve.

pub mod commands;
pub mod config;
pub mod server;

pub use commands::{
    cmd_ask, cmd_bench, cmd_index, cmd_report, AskArgs, BenchArgs, IndexArgs, ReportArgs, ReportFormat,
};
pub use config::AppConfig;

use ecorag_core::embed::EmbedError;
use ecorag_core::index::IndexError;
use ecorag_core::provider::ProviderError;
use ecorag_core::RagError;

pub const EXIT_FAILURE: u8 = 1;
/// Bad input: missing files, invalid config, malformed datasets or runs.
pub const EXIT_INPUT: u8 = 2;
/// A model provider was unreachable or misbehaved.
pub const EXIT_PROVIDER: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }

    pub fn provider(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_PROVIDER,
            message: e.to_string(),
        }
    }

    pub fn failure(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: e.to_string(),
        }
    }
}

fn provider_code(e: &ProviderError) -> u8 {
    match e {
        ProviderError::Config(_) => EXIT_INPUT,
        _ => EXIT_PROVIDER,
    }
}

fn embed_code(e: &EmbedError) -> u8 {
    match e {
        EmbedError::Provider(p) => provider_code(p),
        EmbedError::Batch { first, .. } => embed_code(first),
        EmbedError::EmptyText | EmbedError::Dimension { .. } | EmbedError::Degenerate => EXIT_FAILURE,
    }
}

impl From<RagError> for CliError {
    fn from(e: RagError) -> Self {
        let code = match &e {
            RagError::EmptyQuestion | RagError::ZeroTopK => EXIT_INPUT,
            RagError::Embed(inner) => embed_code(inner),
            RagError::Generate(p) => provider_code(p),
            RagError::Index(IndexError::Embed(inner)) => embed_code(inner),
            RagError::Index(_) => EXIT_FAILURE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        let code = match &e {
            IndexError::Embed(inner) => embed_code(inner),
            IndexError::Empty | IndexError::Format(_) | IndexError::Corruption(_) => EXIT_INPUT,
            IndexError::Dimension { .. } | IndexError::Io(_) => EXIT_FAILURE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}
