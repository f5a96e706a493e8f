//! Local retrieval-augmented question answering with energy and carbon
//! accounting, plus the benchmark statistics used to compare models.

pub mod corpus;
pub mod embed;
pub mod energy;
pub mod eval;
pub mod index;
pub mod provider;
pub mod rag;

pub use corpus::{Chunk, ChunkConfig, Document};
pub use embed::{Embedder, Embedding, UnitEmbedding};
pub use energy::{CarbonIntensityTable, EnergyMonitor, EnergyReport, EnergySource};
pub use eval::{McqItem, MetricsReport, RunRecord};
pub use index::{SearchHit, VectorIndex};
pub use provider::ProviderConfig;
pub use rag::{RagAnswer, RagEngine, RagError};
