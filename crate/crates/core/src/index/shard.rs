use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::TokenEmbeddingMatrix;

use super::format::{decode_dense, encode_dense, rows_u16, write_id, Cursor, DType, Header, SHARD_MAGIC};

#[derive(Debug, Clone, PartialEq)]
pub struct ShardRecord {
    pub id: String,
    pub matrix: TokenEmbeddingMatrix,
}

/// A batch of exported embedding records, all with the same dtype and width.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingShard {
    pub dtype: DType,
    pub dim: usize,
    pub records: Vec<ShardRecord>,
}

/// What a shard is expected to hold; decides the allowed row counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShardKind {
    /// 1..=192 rows per record.
    Passage,
    /// Exactly 32 rows per record.
    Query,
    Any,
}

impl EmbeddingShard {
    pub fn new(dtype: DType, dim: usize) -> Result<Self> {
        if !dtype.is_dense() {
            return Err(Error::Incompatible("shards hold dense values only".into()));
        }
        if dim == 0 {
            return Err(Error::Shape("shard dim must be positive".into()));
        }
        Ok(Self {
            dtype,
            dim,
            records: Vec::new(),
        })
    }

    pub fn push(&mut self, id: impl Into<String>, matrix: TokenEmbeddingMatrix) -> Result<()> {
        if matrix.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: matrix.dim(),
            });
        }
        self.records.push(ShardRecord { id: id.into(), matrix });
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&TokenEmbeddingMatrix> {
        self.records.iter().find(|r| r.id == id).map(|r| &r.matrix)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        Header::new(SHARD_MAGIC, self.dtype, self.dim, self.records.len()).write(&mut out);
        for r in &self.records {
            write_id(&mut out, &r.id)?;
            out.extend_from_slice(&rows_u16(r.matrix.rows())?.to_le_bytes());
            encode_dense(&r.matrix, self.dtype, &mut out);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let header = Header::read(bytes, SHARD_MAGIC)?;
        let dtype = header.dtype()?;
        let mut shard = Self::new(dtype, header.dim as usize)?;
        let bpv = dtype.bytes_per_vector(shard.dim);
        let mut c = Cursor::new(&bytes[super::HEADER_LEN..]);
        let truncated = |i| Error::Truncated(format!("shard record {i} is cut short"));
        for i in 0..header.record_count {
            let id_len = c.u16().ok_or_else(|| truncated(i))? as usize;
            let id = c.take(id_len).ok_or_else(|| truncated(i))?;
            let id =
                std::str::from_utf8(id).map_err(|_| Error::Corrupt(format!("shard record {i} id is not UTF-8")))?;
            let rows = c.u16().ok_or_else(|| truncated(i))? as usize;
            let values = c.take(rows * bpv).ok_or_else(|| truncated(i))?;
            let matrix = decode_dense(values, rows, shard.dim, dtype)
                .map_err(|e| Error::Corrupt(format!("shard record {id:?}: {e}")))?;
            shard.records.push(ShardRecord {
                id: id.to_string(),
                matrix,
            });
        }
        if c.pos() + super::HEADER_LEN != bytes.len() {
            return Err(Error::Corrupt(format!(
                "{} trailing bytes after the last shard record",
                bytes.len() - c.pos() - super::HEADER_LEN
            )));
        }
        Ok(shard)
    }
}

pub fn read_shard(path: &Path) -> Result<EmbeddingShard> {
    EmbeddingShard::decode(&fs::read(path)?)
}

pub fn write_shard(path: &Path, shard: &EmbeddingShard) -> Result<()> {
    fs::write(path, shard.encode()?)?;
    Ok(())
}
