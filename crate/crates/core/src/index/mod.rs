//! On-disk rerank index and embedding shards.
//!
//! Index file layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LIRX"
//! 4       4     version = 1 (u32)
//! 8       1     dtype: 0 = f32, 1 = f16, 2 = bit
//! 9       4     dim (u32): elements, or bits for dtype 2
//! 13      8     record_count (u64)
//! 21      ...   id table, one entry per record sorted bytewise by id:
//!                 u16 id length, id bytes (UTF-8), u16 rows, u64 offset
//! ...     ...   payload: concatenated records
//! ```
//!
//! Record offsets are relative to the first payload byte. A record is
//! `rows * bytes_per_vector(dtype, dim)` bytes: f32 and f16 values are stored
//! row-major, packed rows are `dim / 8` bytes in the bit layout described in
//! [`crate::quantize`].
//!
//! Shards use the same 21-byte header with magic `"LIRS"`, followed by
//! records inline: u16 id length, id bytes, u16 rows, then the values. Shards
//! are always dense.

mod build;
mod format;
mod reader;
mod shard;
mod validate;

pub use build::{build_index, encode_index, BuildOptions, BuildReport};
pub use format::{DType, HEADER_LEN, INDEX_MAGIC, SHARD_MAGIC, VERSION};
pub use reader::{load_index, IdEntry, RerankIndex};
pub use shard::{read_shard, write_shard, EmbeddingShard, ShardKind, ShardRecord};
pub use validate::{validate_index, validate_index_bytes, validate_shard, ValidationReport, Violation, ViolationKind};

use crate::matrix::TokenEmbeddingMatrix;
use crate::quantize::PackedBinaryMatrix;

/// A stored passage: dense token vectors or packed sign bits.
#[derive(Debug, Clone, PartialEq)]
pub enum PassageRecord {
    Dense(TokenEmbeddingMatrix),
    Packed(PackedBinaryMatrix),
}

impl PassageRecord {
    pub fn rows(&self) -> usize {
        match self {
            PassageRecord::Dense(m) => m.rows(),
            PassageRecord::Packed(p) => p.rows(),
        }
    }

    pub fn as_dense(&self) -> Option<&TokenEmbeddingMatrix> {
        match self {
            PassageRecord::Dense(m) => Some(m),
            PassageRecord::Packed(_) => None,
        }
    }

    pub fn as_packed(&self) -> Option<&PackedBinaryMatrix> {
        match self {
            PassageRecord::Packed(p) => Some(p),
            PassageRecord::Dense(_) => None,
        }
    }
}
