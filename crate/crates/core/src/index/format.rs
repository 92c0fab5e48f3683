use std::fmt;
use std::str::FromStr;

use half::f16;

use crate::error::{Error, Result};
use crate::matrix::TokenEmbeddingMatrix;
use crate::quantize::PackedBinaryMatrix;

use super::PassageRecord;

pub const INDEX_MAGIC: [u8; 4] = *b"LIRX";
pub const SHARD_MAGIC: [u8; 4] = *b"LIRS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F16 = 1,
    Bit = 2,
}

impl DType {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F16),
            2 => Some(DType::Bit),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// `dim` counts elements for dense types and bits for [`DType::Bit`].
    pub fn bytes_per_vector(self, dim: usize) -> usize {
        match self {
            DType::F32 => dim * 4,
            DType::F16 => dim * 2,
            DType::Bit => dim / 8,
        }
    }

    pub fn is_dense(self) -> bool {
        self != DType::Bit
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DType::F32 => "f32",
            DType::F16 => "f16",
            DType::Bit => "bit",
        })
    }
}

impl FromStr for DType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(DType::F32),
            "f16" => Ok(DType::F16),
            "bit" => Ok(DType::Bit),
            other => Err(Error::invalid(format!("unknown dtype {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Header {
    pub magic: [u8; 4],
    pub version: u32,
    pub dtype_code: u8,
    pub dim: u32,
    pub record_count: u64,
}

impl Header {
    pub fn new(magic: [u8; 4], dtype: DType, dim: usize, record_count: usize) -> Self {
        Self {
            magic,
            version: VERSION,
            dtype_code: dtype.code(),
            dim: dim as u32,
            record_count: record_count as u64,
        }
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.dtype_code);
        out.extend_from_slice(&self.dim.to_le_bytes());
        out.extend_from_slice(&self.record_count.to_le_bytes());
    }

    /// Reads the header and checks magic and version. The dtype code is left
    /// for the caller to interpret.
    pub fn read(bytes: &[u8], magic: [u8; 4]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != magic {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated(format!(
                "header needs {HEADER_LEN} bytes, file holds {}",
                bytes.len()
            )));
        }
        let mut c = Cursor::new(&bytes[4..HEADER_LEN]);
        let version = c.u32().expect("header length checked");
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        Ok(Self {
            magic,
            version,
            dtype_code: c.u8().expect("header length checked"),
            dim: c.u32().expect("header length checked"),
            record_count: c.u64().expect("header length checked"),
        })
    }

    pub fn dtype(&self) -> Result<DType> {
        DType::from_code(self.dtype_code)
            .ok_or_else(|| Error::Corrupt(format!("unknown dtype code {}", self.dtype_code)))
    }
}

/// Little-endian reader over a byte slice. Every read returns `None` past the end.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub(crate) fn write_id(out: &mut Vec<u8>, id: &str) -> Result<()> {
    let len = u16::try_from(id.len())
        .map_err(|_| Error::invalid(format!("passage id longer than 65535 bytes: {id:.32}...")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(id.as_bytes());
    Ok(())
}

pub(crate) fn rows_u16(rows: usize) -> Result<u16> {
    u16::try_from(rows).map_err(|_| Error::Shape(format!("{rows} rows do not fit a record")))
}

/// Serializes dense values in `dtype` (f32 or f16).
pub(crate) fn encode_dense(m: &TokenEmbeddingMatrix, dtype: DType, out: &mut Vec<u8>) {
    match dtype {
        DType::F32 => {
            for x in m.as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        DType::F16 => {
            for x in m.as_slice() {
                out.extend_from_slice(&f16::from_f32(*x).to_le_bytes());
            }
        }
        DType::Bit => unreachable!("dense encoding of packed dtype"),
    }
}

pub(crate) fn decode_dense(bytes: &[u8], rows: usize, dim: usize, dtype: DType) -> Result<TokenEmbeddingMatrix> {
    let data: Vec<f32> = match dtype {
        DType::F32 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect(),
        DType::F16 => bytes
            .chunks_exact(2)
            .map(|b| f16::from_le_bytes([b[0], b[1]]).to_f32())
            .collect(),
        DType::Bit => unreachable!("dense decoding of packed dtype"),
    };
    TokenEmbeddingMatrix::new(rows, dim, data)
}

pub(crate) fn decode_record(bytes: &[u8], rows: usize, dim: usize, dtype: DType) -> Result<PassageRecord> {
    Ok(match dtype {
        DType::Bit => PassageRecord::Packed(PackedBinaryMatrix::from_le_bytes(rows, dim, bytes)?),
        dense => PassageRecord::Dense(decode_dense(bytes, rows, dim, dense)?),
    })
}

/// Index of the first non-finite value in a dense record.
pub(crate) fn first_non_finite(bytes: &[u8], dtype: DType) -> Option<usize> {
    match dtype {
        DType::F32 => bytes
            .chunks_exact(4)
            .position(|b| !f32::from_le_bytes(b.try_into().unwrap()).is_finite()),
        DType::F16 => bytes
            .chunks_exact(2)
            .position(|b| !f16::from_le_bytes([b[0], b[1]]).is_finite()),
        DType::Bit => None,
    }
}
