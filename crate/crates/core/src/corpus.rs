//! Corpus ingestion and character-window chunking.
//!
//! Documents are read from a directory tree of UTF-8 text files, normalized
//! (Unicode NFC, CRLF to LF) and split into fixed-width overlapping windows.
//! Offsets and lengths are counted in Unicode scalar values, not bytes.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use walkdir::WalkDir;

pub const DEFAULT_CHUNK_SIZE: usize = 1000;
pub const DEFAULT_OVERLAP: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus directory {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("no documents found under {0}")]
    NoDocuments(PathBuf),
    #[error("invalid chunking configuration: overlap {overlap} must be smaller than chunk_size {chunk_size}")]
    InvalidChunking { chunk_size: usize, overlap: usize },
    #[error("failed to walk corpus directory: {0}")]
    Walk(#[from] walkdir::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    /// Path relative to the corpus root, `/`-separated.
    pub id: String,
    pub text: String,
    pub source_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub seq: usize,
    /// Offset of the first character, in chars.
    pub start_char: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            chunk_size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

impl ChunkConfig {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, CorpusError> {
        let cfg = Self {
            chunk_size,
            overlap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.chunk_size == 0 || self.overlap >= self.chunk_size {
            return Err(CorpusError::InvalidChunking {
                chunk_size: self.chunk_size,
                overlap: self.overlap,
            });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.chunk_size - self.overlap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

/// Summary of one ingestion pass, emitted as JSON by the indexer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub files_read: usize,
    pub files_skipped: usize,
    pub chunk_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedFile>,
}

/// Normalize raw file contents: NFC composition and CRLF line endings to LF.
pub fn normalize_text(raw: &str) -> String {
    raw.replace("\r\n", "\n").nfc().collect()
}

/// Recursively load every file under `root` whose extension is in
/// `extensions` (case-insensitive, without the dot), in lexicographic path
/// order. Unreadable, non-UTF-8 or empty files are skipped and recorded in
/// the returned report.
pub fn load_documents(
    root: &Path,
    extensions: &BTreeSet<String>,
) -> Result<(Vec<Document>, IngestionReport), CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::MissingRoot(root.to_path_buf()));
    }
    let wanted: BTreeSet<String> = extensions.iter().map(|e| e.to_ascii_lowercase()).collect();

    let mut docs = Vec::new();
    let mut report = IngestionReport::default();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| wanted.contains(&e.to_ascii_lowercase()))
            .unwrap_or(false);
        if !matches {
            continue;
        }
        let rel = path.strip_prefix(root).unwrap_or(path);
        let id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let source_path = path.display().to_string();

        let skip = |report: &mut IngestionReport, reason: String| {
            log::warn!("skipping {source_path}: {reason}");
            report.files_skipped += 1;
            report.skipped.push(SkippedFile {
                path: source_path.clone(),
                reason,
            });
        };
        match std::fs::read(path) {
            Err(e) => skip(&mut report, e.to_string()),
            Ok(bytes) => match String::from_utf8(bytes) {
                Err(_) => skip(&mut report, "not valid UTF-8".to_string()),
                Ok(raw) => {
                    let text = normalize_text(&raw);
                    if text.is_empty() {
                        skip(&mut report, "empty after normalization".to_string());
                    } else {
                        report.files_read += 1;
                        docs.push(Document {
                            id,
                            text,
                            source_path,
                        });
                    }
                }
            },
        }
    }
    // walkdir sorts per directory; a global sort by id gives a single
    // lexicographic order across nesting levels.
    docs.sort_by(|a, b| a.id.cmp(&b.id));

    if docs.is_empty() {
        return Err(CorpusError::NoDocuments(root.to_path_buf()));
    }
    Ok((docs, report))
}

/// Split a document into windows of `chunk_size` chars advancing by
/// `chunk_size - overlap`; the last window is clamped to the end of the text.
pub fn chunk_text(doc: &Document, cfg: ChunkConfig) -> Result<Vec<Chunk>, CorpusError> {
    cfg.validate()?;
    // Byte offset of every char boundary, plus the end of the string.
    let bounds: Vec<usize> = doc
        .text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(doc.text.len()))
        .collect();
    let len = bounds.len() - 1;
    if len == 0 {
        return Ok(Vec::new());
    }

    let mut chunks = Vec::with_capacity(expected_chunk_count(len, cfg));
    let mut start = 0;
    loop {
        let end = (start + cfg.chunk_size).min(len);
        chunks.push(Chunk {
            doc_id: doc.id.clone(),
            seq: chunks.len(),
            start_char: start,
            text: doc.text[bounds[start]..bounds[end]].to_string(),
        });
        if end == len {
            break;
        }
        start += cfg.stride();
    }
    Ok(chunks)
}

/// Chunk every document in order.
pub fn chunk_documents(docs: &[Document], cfg: ChunkConfig) -> Result<Vec<Chunk>, CorpusError> {
    let mut out = Vec::new();
    for doc in docs {
        out.extend(chunk_text(doc, cfg)?);
    }
    Ok(out)
}

/// Closed-form chunk count for a non-empty text of `len` chars.
pub fn expected_chunk_count(len: usize, cfg: ChunkConfig) -> usize {
    if len == 0 {
        return 0;
    }
    let span = len.saturating_sub(cfg.overlap).max(1);
    span.div_ceil(cfg.stride())
}

/// Rebuild the source text from the chunks of one document by dropping the
/// overlapping prefix of every chunk after the first.
pub fn reconstruct(chunks: &[Chunk], overlap: usize) -> String {
    let mut out = String::new();
    for (i, c) in chunks.iter().enumerate() {
        if i == 0 {
            out.push_str(&c.text);
        } else {
            out.extend(c.text.chars().skip(overlap));
        }
    }
    out
}
