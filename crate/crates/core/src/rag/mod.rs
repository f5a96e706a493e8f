//! The query path: retrieve context, build the prompt, generate, parse the
//! choice, and stamp the answer with latency, energy and CO2.

mod generate;
mod parse;
mod prompt;

pub use generate::{Generation, Generator, HttpGenerator};
pub use parse::parse_choice;
pub use prompt::{
    build_prompt, option_labels, render_context, render_options, AnswerOption, PromptTemplate, TemplateError,
    MCQ_TEMPLATE, NO_CONTEXT_MARKER, YES_NO_MAYBE_TEMPLATE,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embed::{normalize, EmbedError, Embedder};
use crate::energy::EnergyMonitor;
use crate::index::{IndexError, SearchHit, VectorIndex};
use crate::provider::ProviderError;

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error("question must not be empty")]
    EmptyQuestion,
    #[error("top_k must be at least 1")]
    ZeroTopK,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("generator: {0}")]
    Generate(#[from] ProviderError),
}

impl RagError {
    /// Whether the error came from an unreachable or misbehaving provider.
    pub fn is_provider(&self) -> bool {
        matches!(
            self,
            RagError::Generate(_) | RagError::Embed(EmbedError::Provider(_) | EmbedError::Batch { .. })
        )
    }
}

/// How per-query energy is attributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    /// Queries run one at a time; each answer carries the energy of its own
    /// window.
    #[default]
    PerQuery,
    /// Queries may overlap; only session totals are meaningful and answers
    /// carry zero energy.
    SessionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagAnswer {
    pub raw_text: String,
    pub parsed_choice: Option<String>,
    pub sources: Vec<SearchHit>,
    pub latency_ms: f64,
    pub generation_ms: f64,
    pub energy_wh: f64,
    pub co2_g: f64,
    pub token_count: Option<u64>,
    pub attribution: Attribution,
}

/// Embed the question and return its nearest chunks.
pub async fn retrieve(
    index: &VectorIndex,
    embedder: &dyn Embedder,
    question: &str,
    top_k: usize,
) -> Result<Vec<SearchHit>, RagError> {
    if question.trim().is_empty() {
        return Err(RagError::EmptyQuestion);
    }
    if top_k == 0 {
        return Err(RagError::ZeroTopK);
    }
    let q = normalize(&embedder.embed(question).await?)?;
    Ok(index.search_top_k(&q, top_k)?)
}

pub struct RagEngine {
    index: Arc<VectorIndex>,
    embedder: Arc<dyn Embedder>,
    generator: Arc<dyn Generator>,
    template: PromptTemplate,
    top_k: usize,
    monitor: Arc<EnergyMonitor>,
    attribution: Attribution,
}

impl RagEngine {
    pub fn new(
        index: Arc<VectorIndex>,
        embedder: Arc<dyn Embedder>,
        generator: Arc<dyn Generator>,
        template: PromptTemplate,
        top_k: usize,
        monitor: Arc<EnergyMonitor>,
    ) -> Self {
        Self {
            index,
            embedder,
            generator,
            template,
            top_k,
            monitor,
            attribution: Attribution::PerQuery,
        }
    }

    pub fn with_attribution(mut self, attribution: Attribution) -> Self {
        self.attribution = attribution;
        self
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn monitor(&self) -> &Arc<EnergyMonitor> {
        &self.monitor
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    pub fn top_k(&self) -> usize {
        self.top_k
    }

    pub fn generator_model(&self) -> &str {
        self.generator.model_name()
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub async fn ask(&self, question: &str, options: Option<&[AnswerOption]>) -> Result<RagAnswer, RagError> {
        self.ask_with_top_k(question, options, self.top_k).await
    }

    pub async fn ask_with_top_k(
        &self,
        question: &str,
        options: Option<&[AnswerOption]>,
        top_k: usize,
    ) -> Result<RagAnswer, RagError> {
        if question.trim().is_empty() {
            return Err(RagError::EmptyQuestion);
        }
        let clock = self.monitor.clock().clone();
        let start = self.monitor.mark();

        let sources = retrieve(&self.index, self.embedder.as_ref(), question, top_k).await?;
        let prompt = build_prompt(&self.template, &sources, question, options);

        let gen_start = clock.now_ms();
        let generation = self.generator.generate(&prompt).await?;
        self.monitor.record_prompt();
        let gen_end = clock.now_ms();

        let parsed_choice = options.and_then(|opts| parse_choice(&generation.text, &option_labels(opts)));

        let end = self.monitor.mark();
        let (energy_wh, co2_g) = match self.attribution {
            Attribution::PerQuery => {
                let wh = self.monitor.energy_between(start, end).total_wh();
                (wh, wh / 1000.0 * self.monitor.intensity())
            }
            Attribution::SessionOnly => (0.0, 0.0),
        };
        Ok(RagAnswer {
            raw_text: generation.text,
            parsed_choice,
            sources,
            latency_ms: end.t_ms - start.t_ms,
            generation_ms: gen_end - gen_start,
            energy_wh,
            co2_g,
            token_count: generation.token_count,
            attribution: self.attribution,
        })
    }
}
