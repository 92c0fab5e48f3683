use std::fs::File;
use std::ops::Deref;
use std::path::Path;

use memmap2::Mmap;

use crate::error::{Error, Result};

use super::format::{decode_record, Cursor, DType, Header, HEADER_LEN, INDEX_MAGIC};
use super::validate::{structural_violations, ViolationKind};
use super::PassageRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdEntry {
    pub id: String,
    pub rows: usize,
    /// Relative to the start of the payload.
    pub offset: u64,
}

enum Backing {
    Mapped(Mmap),
    Owned(Vec<u8>),
}

impl Deref for Backing {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        match self {
            Backing::Mapped(m) => m,
            Backing::Owned(v) => v,
        }
    }
}

/// Parsed header and id table; payload bytes start at `payload_start`.
pub(crate) struct RawIndex {
    pub header: Header,
    pub dtype: DType,
    pub dim: usize,
    pub entries: Vec<IdEntry>,
    pub payload_start: usize,
}

impl RawIndex {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let header = Header::read(bytes, INDEX_MAGIC)?;
        let dtype = header.dtype()?;
        let dim = header.dim as usize;
        if dim == 0 || (dtype == DType::Bit && dim % 8 != 0) {
            return Err(Error::Corrupt(format!("invalid dim {dim} for {dtype}")));
        }
        let mut c = Cursor::new(&bytes[HEADER_LEN..]);
        let truncated = |i| Error::Truncated(format!("id table ends inside entry {i}"));
        // Every entry takes at least 12 bytes; refuse absurd counts before allocating.
        let max_entries = (bytes.len() - HEADER_LEN) / 12;
        if header.record_count > max_entries as u64 {
            return Err(truncated(max_entries as u64));
        }
        let mut entries = Vec::with_capacity(header.record_count as usize);
        for i in 0..header.record_count {
            let id_len = c.u16().ok_or_else(|| truncated(i))? as usize;
            let id = c.take(id_len).ok_or_else(|| truncated(i))?;
            let id = std::str::from_utf8(id)
                .map_err(|_| Error::Corrupt(format!("id of entry {i} is not UTF-8")))?
                .to_string();
            let rows = c.u16().ok_or_else(|| truncated(i))? as usize;
            let offset = c.u64().ok_or_else(|| truncated(i))?;
            entries.push(IdEntry { id, rows, offset });
        }
        Ok(Self {
            header,
            dtype,
            dim,
            entries,
            payload_start: HEADER_LEN + c.pos(),
        })
    }

    pub fn record_len(&self, e: &IdEntry) -> u64 {
        (e.rows * self.dtype.bytes_per_vector(self.dim)) as u64
    }

    pub fn declared_payload(&self) -> u64 {
        self.entries.iter().map(|e| self.record_len(e)).sum()
    }
}

/// Read-only rerank index. The id table lives in memory; records are decoded
/// from the backing bytes on demand. Safe to share across threads.
pub struct RerankIndex {
    data: Backing,
    dtype: DType,
    dim: usize,
    entries: Vec<IdEntry>,
    payload_start: usize,
}

impl std::fmt::Debug for RerankIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RerankIndex")
            .field("dtype", &self.dtype)
            .field("dim", &self.dim)
            .field("records", &self.entries.len())
            .finish()
    }
}

/// Memory-maps an index file read-only.
pub fn load_index(path: &Path) -> Result<RerankIndex> {
    RerankIndex::open(path)
}

impl RerankIndex {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        // SAFETY: the mapping is read-only and the index is treated as
        // immutable for its lifetime; writers create new files instead of
        // modifying loaded ones.
        let map = unsafe { Mmap::map(&file)? };
        Self::from_backing(Backing::Mapped(map))
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        Self::from_backing(Backing::Owned(bytes))
    }

    fn from_backing(data: Backing) -> Result<Self> {
        let raw = RawIndex::parse(&data)?;
        let actual = (data.len() - raw.payload_start) as u64;
        let declared = raw.declared_payload();
        if actual < declared {
            return Err(Error::Truncated(format!(
                "declared {declared} payload bytes, file holds {actual}"
            )));
        }
        if actual > declared {
            return Err(Error::Corrupt(format!(
                "{} trailing bytes after the declared payload",
                actual - declared
            )));
        }
        if let Some(v) = structural_violations(&raw, actual)
            .into_iter()
            .find(|v| v.kind != ViolationKind::NonFiniteValue)
        {
            return Err(Error::Corrupt(v.message));
        }
        Ok(Self {
            dtype: raw.dtype,
            dim: raw.dim,
            entries: raw.entries,
            payload_start: raw.payload_start,
            data,
        })
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    /// Elements per vector, or bits for packed indexes.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IdEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn payload_bytes(&self) -> usize {
        self.data.len() - self.payload_start
    }

    fn find(&self, id: &str) -> Option<&IdEntry> {
        self.entries
            .binary_search_by(|e| e.id.as_bytes().cmp(id.as_bytes()))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.find(id).is_some()
    }

    /// Raw stored bytes of a record, without copying.
    pub fn record_bytes(&self, id: &str) -> Result<&[u8]> {
        let e = self.find(id).ok_or_else(|| Error::UnknownPassage(id.to_string()))?;
        let start = self.payload_start + e.offset as usize;
        let len = e.rows * self.dtype.bytes_per_vector(self.dim);
        Ok(&self.data[start..start + len])
    }

    /// Decodes a record; half-precision values are widened to f32.
    pub fn get_passage(&self, id: &str) -> Result<PassageRecord> {
        let bytes = self.record_bytes(id)?;
        let rows = bytes.len() / self.dtype.bytes_per_vector(self.dim);
        decode_record(bytes, rows, self.dim, self.dtype)
    }
}
