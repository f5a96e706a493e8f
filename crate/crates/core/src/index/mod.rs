//! Exact (flat) inner-product index over unit-normalized chunk embeddings.

mod format;

pub use format::{load_index, read_index, save_index, write_index, FORMAT_VERSION, MAGIC};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Chunk;
use crate::embed::{embed_batch, normalize, EmbedError, Embedder, UnitEmbedding};

pub const DEFAULT_TOP_K: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("dimension mismatch: index has {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("cannot build an index from zero chunks")]
    Empty,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("unsupported index format: {0}")]
    Format(String),
    #[error("corrupted index file: {0}")]
    Corruption(String),
    #[error("index I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChunkRef {
    pub doc_id: String,
    pub seq: usize,
    pub start_char: usize,
}

impl From<&Chunk> for ChunkRef {
    fn from(c: &Chunk) -> Self {
        Self {
            doc_id: c.doc_id.clone(),
            seq: c.seq,
            start_char: c.start_char,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    #[serde(flatten)]
    pub chunk_ref: ChunkRef,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMetadata {
    pub embedding_model: String,
    pub chunk_size: usize,
    pub overlap: usize,
    pub created_at: String,
    /// Hex SHA-256 over every entry's reference and text; filled in on seal.
    #[serde(default)]
    pub corpus_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    #[serde(flatten)]
    pub chunk_ref: ChunkRef,
    pub text: String,
    pub score: f64,
}

/// A sealed, immutable index. Vectors are stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
    vectors: Vec<f32>,
    meta: IndexMetadata,
}

/// Append-only builder; [`IndexBuilder::seal`] freezes it into a [`VectorIndex`].
#[derive(Debug)]
pub struct IndexBuilder {
    dim: Option<usize>,
    entries: Vec<IndexEntry>,
    vectors: Vec<f32>,
    meta: IndexMetadata,
}

impl IndexBuilder {
    pub fn new(meta: IndexMetadata) -> Self {
        Self {
            dim: None,
            entries: Vec::new(),
            vectors: Vec::new(),
            meta,
        }
    }

    /// Append one entry. The first vector fixes the index dimension.
    pub fn push(&mut self, chunk_ref: ChunkRef, text: String, vector: &UnitEmbedding) -> Result<(), IndexError> {
        let dim = *self.dim.get_or_insert(vector.dim());
        if vector.dim() != dim {
            return Err(IndexError::Dimension {
                expected: dim,
                got: vector.dim(),
            });
        }
        self.entries.push(IndexEntry { chunk_ref, text });
        self.vectors.extend_from_slice(vector.values());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn seal(mut self) -> VectorIndex {
        self.meta.corpus_fingerprint = fingerprint(&self.entries);
        VectorIndex {
            dim: self.dim.unwrap_or(0),
            entries: self.entries,
            vectors: self.vectors,
            meta: self.meta,
        }
    }
}

pub fn fingerprint(entries: &[IndexEntry]) -> String {
    let mut h = Sha256::new();
    for e in entries {
        for part in [e.chunk_ref.doc_id.as_bytes(), e.text.as_bytes()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        h.update((e.chunk_ref.seq as u64).to_le_bytes());
        h.update((e.chunk_ref.start_char as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Embed every chunk, normalize, and seal the result.
pub async fn build_index(
    chunks: &[Chunk],
    embedder: &dyn Embedder,
    parallelism: usize,
    meta: IndexMetadata,
) -> Result<VectorIndex, IndexError> {
    if chunks.is_empty() {
        return Err(IndexError::Empty);
    }
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let raw = embed_batch(embedder, &texts, parallelism).await?;
    let mut builder = IndexBuilder::new(meta);
    for (chunk, v) in chunks.iter().zip(&raw) {
        let unit = normalize(v)?;
        builder.push(ChunkRef::from(chunk), chunk.text.clone(), &unit)?;
    }
    Ok(builder.seal())
}

/// Ordering of scored entries: score descending, then (doc_id, seq) ascending.
fn rank_order(a: &(f64, &IndexEntry), b: &(f64, &IndexEntry)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| a.1.chunk_ref.doc_id.cmp(&b.1.chunk_ref.doc_id))
        .then_with(|| a.1.chunk_ref.seq.cmp(&b.1.chunk_ref.seq))
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

impl VectorIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn metadata(&self) -> &IndexMetadata {
        &self.meta
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Exact top-k by full scan. Returns `min(k, len)` hits.
    pub fn search_top_k(&self, query: &UnitEmbedding, k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if self.entries.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        if query.dim() != self.dim {
            return Err(IndexError::Dimension {
                expected: self.dim,
                got: query.dim(),
            });
        }
        let q = query.values();
        let mut scored: Vec<(f64, &IndexEntry)> = self
            .vectors
            .chunks_exact(self.dim)
            .zip(&self.entries)
            .map(|(v, e)| (dot(q, v), e))
            .collect();
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank_order);
            scored.truncate(k);
        }
        scored.sort_by(rank_order);
        Ok(scored
            .into_iter()
            .map(|(score, e)| SearchHit {
                chunk_ref: e.chunk_ref.clone(),
                text: e.text.clone(),
                score,
            })
            .collect())
    }
}
