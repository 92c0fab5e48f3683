use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::MAX_PASSAGE_ROWS;
use crate::quantize::binarize;

use super::format::{encode_dense, rows_u16, write_id, DType, Header, HEADER_LEN, INDEX_MAGIC};
use super::shard::read_shard;
use super::PassageRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Storage type for dense values: f32 or f16.
    pub dtype: DType,
    /// Binarize every record; the index is then stored as [`DType::Bit`].
    pub quantize: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            dtype: DType::F32,
            quantize: false,
        }
    }
}

impl BuildOptions {
    fn storage(&self) -> Result<DType> {
        match (self.quantize, self.dtype) {
            (true, _) | (false, DType::Bit) => Ok(DType::Bit),
            (false, dense) => Ok(dense),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildReport {
    pub record_count: u64,
    pub dtype: DType,
    pub dim: usize,
    pub token_count: u64,
    pub id_table_bytes: u64,
    pub payload_bytes: u64,
    pub file_bytes: u64,
    /// Duplicate ids abort the build, so a finished report always found none.
    pub duplicate_ids: u64,
}

/// Reads every shard, checks ids and widths, and writes the index to `out`.
pub fn build_index<P: AsRef<Path>>(shards: &[P], out: &Path, opts: BuildOptions) -> Result<BuildReport> {
    let mut records: BTreeMap<String, PassageRecord> = BTreeMap::new();
    let mut dim = None;
    for path in shards {
        let path = path.as_ref();
        let shard = read_shard(path)?;
        match dim {
            None => dim = Some(shard.dim),
            Some(d) if d != shard.dim => {
                return Err(Error::Incompatible(format!(
                    "shard {} has dim {}, expected {d}",
                    path.display(),
                    shard.dim
                )));
            }
            Some(_) => {}
        }
        for r in shard.records {
            if records.contains_key(&r.id) {
                return Err(Error::DuplicatePassage(r.id));
            }
            records.insert(r.id, PassageRecord::Dense(r.matrix));
        }
    }
    let dim = dim.ok_or_else(|| Error::invalid("no shards given"))?;
    let (bytes, report) = encode_index(records, dim, opts)?;
    fs::write(out, &bytes)?;
    Ok(report)
}

/// Encodes dense records into index bytes. Records are laid out in id order.
pub fn encode_index(
    records: BTreeMap<String, PassageRecord>,
    dim: usize,
    opts: BuildOptions,
) -> Result<(Vec<u8>, BuildReport)> {
    let dtype = opts.storage()?;
    if dtype == DType::Bit && dim % 8 != 0 {
        return Err(Error::NotByteAligned(dim));
    }
    let bpv = dtype.bytes_per_vector(dim);

    let mut table = Vec::new();
    let mut payload = Vec::new();
    let mut token_count = 0u64;
    for (id, record) in &records {
        let PassageRecord::Dense(m) = record else {
            return Err(Error::invalid("index builder takes dense records"));
        };
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: m.dim(),
            });
        }
        if m.rows() > MAX_PASSAGE_ROWS {
            return Err(Error::Shape(format!(
                "passage {id:?} has {} rows, at most {MAX_PASSAGE_ROWS} allowed",
                m.rows()
            )));
        }
        write_id(&mut table, id)?;
        table.extend_from_slice(&rows_u16(m.rows())?.to_le_bytes());
        table.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        let start = payload.len();
        match dtype {
            DType::Bit => binarize(m)?.write_le_bytes(&mut payload),
            dense => encode_dense(m, dense, &mut payload),
        }
        debug_assert_eq!(payload.len() - start, m.rows() * bpv);
        token_count += m.rows() as u64;
    }

    let mut out = Vec::with_capacity(HEADER_LEN + table.len() + payload.len());
    Header::new(INDEX_MAGIC, dtype, dim, records.len()).write(&mut out);
    out.extend_from_slice(&table);
    out.extend_from_slice(&payload);

    let report = BuildReport {
        record_count: records.len() as u64,
        dtype,
        dim,
        token_count,
        id_table_bytes: table.len() as u64,
        payload_bytes: payload.len() as u64,
        file_bytes: out.len() as u64,
        duplicate_ids: 0,
    };
    Ok((out, report))
}
