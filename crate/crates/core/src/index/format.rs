//! On-disk index layout (all integers little-endian):
//!
//! ```text
//! offset  size        field
//! 0       4           magic "GRAG"
//! 4       4           format version (u32)
//! 8       8           header length H (u64)
//! 16      H           header, UTF-8 JSON {dim, count, metadata, entries}
//! 16+H    4*count*dim vectors, packed f32, row-major
//! end-8   8           checksum (u64): first 8 bytes of SHA-256 over [8, end-8)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{IndexEntry, IndexError, IndexMetadata, VectorIndex};
use crate::embed::{l2_norm, UnitEmbedding};

pub const MAGIC: &[u8; 4] = b"GRAG";
pub const FORMAT_VERSION: u32 = 1;

const UNIT_TOLERANCE: f64 = 1e-5;

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    count: usize,
    metadata: IndexMetadata,
    entries: Vec<IndexEntry>,
}

fn checksum(payload: &[u8]) -> u64 {
    let digest = Sha256::digest(payload);
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

pub fn write_index(index: &VectorIndex) -> Vec<u8> {
    let header = Header {
        dim: index.dim,
        count: index.entries.len(),
        metadata: index.meta.clone(),
        entries: index.entries.clone(),
    };
    let header = serde_json::to_vec(&header).expect("index header serializes");

    let mut out = Vec::with_capacity(24 + header.len() + index.vectors.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for v in &index.vectors {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let sum = checksum(&out[8..]);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn read_index(bytes: &[u8]) -> Result<VectorIndex, IndexError> {
    if bytes.len() < 8 {
        return Err(IndexError::Corruption("file too short for header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(IndexError::Format("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(IndexError::Format(format!(
            "version {version}, expected {FORMAT_VERSION}"
        )));
    }
    if bytes.len() < 8 + 8 + 8 {
        return Err(IndexError::Corruption("truncated file".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if checksum(&body[8..]) != stored {
        return Err(IndexError::Corruption("checksum mismatch".into()));
    }

    let header_len = u64::from_le_bytes(body[8..16].try_into().unwrap());
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|h| h.checked_add(16))
        .filter(|&end| end <= body.len())
        .ok_or_else(|| IndexError::Corruption("header length out of range".into()))?;
    let header: Header = serde_json::from_slice(&body[16..header_end])
        .map_err(|e| IndexError::Corruption(format!("header: {e}")))?;
    if header.entries.len() != header.count {
        return Err(IndexError::Corruption("entry count mismatch".into()));
    }

    let raw = &body[header_end..];
    let expected = header
        .count
        .checked_mul(header.dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| IndexError::Corruption("vector block size overflows".into()))?;
    if raw.len() != expected {
        return Err(IndexError::Corruption(format!(
            "vector block is {} bytes, expected {expected}",
            raw.len()
        )));
    }
    let vectors: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if header.dim > 0 {
        for (i, row) in vectors.chunks_exact(header.dim).enumerate() {
            if (l2_norm(row) - 1.0).abs() > UNIT_TOLERANCE {
                return Err(IndexError::Corruption(format!("vector {i} is not unit length")));
            }
        }
    }
    Ok(VectorIndex {
        dim: header.dim,
        entries: header.entries,
        vectors,
        meta: header.metadata,
    })
}

pub fn save_index(index: &VectorIndex, path: &Path) -> Result<(), IndexError> {
    std::fs::write(path, write_index(index))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<VectorIndex, IndexError> {
    read_index(&std::fs::read(path)?)
}

impl VectorIndex {
    /// Vector `i` as a unit embedding (used to issue self-queries).
    pub fn unit_vector(&self, i: usize) -> UnitEmbedding {
        UnitEmbedding::from_unit_values(self.vector(i).to_vec())
    }
}
