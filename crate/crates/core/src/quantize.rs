//! Sign binarization, bit-packed storage and popcount MaxSim.
//!
//! Layout: each row is `ceil(dim_bits / 64)` little-endian `u64` words.
//! Element `j` lives in word `j / 64` at bit `j % 64` (LSB first), so byte `k`
//! of the serialized row holds elements `8k..8k+8`. Pad bits past `dim_bits`
//! are always zero. An element maps to bit 1 iff it is `>= 0.0` (zero counts
//! as positive).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::index::DType;
use crate::kernel;
use crate::matrix::{TokenEmbeddingMatrix, QUERY_ROWS};

pub fn words_per_row(dim_bits: usize) -> usize {
    dim_bits.div_ceil(64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedBinaryMatrix {
    rows: usize,
    dim_bits: usize,
    words: Vec<u64>,
}

impl PackedBinaryMatrix {
    pub fn new(rows: usize, dim_bits: usize, words: Vec<u64>) -> Result<Self> {
        if dim_bits == 0 || dim_bits % 8 != 0 {
            return Err(Error::NotByteAligned(dim_bits));
        }
        let wpr = words_per_row(dim_bits);
        if words.len() != rows * wpr {
            return Err(Error::Shape(format!(
                "{rows} rows of {dim_bits} bits need {} words, got {}",
                rows * wpr,
                words.len()
            )));
        }
        let tail = dim_bits % 64;
        if tail != 0 {
            let pad_mask = !0u64 << tail;
            if words.chunks_exact(wpr).any(|r| r[wpr - 1] & pad_mask != 0) {
                return Err(Error::Shape("pad bits must be zero".into()));
            }
        }
        Ok(Self { rows, dim_bits, words })
    }

    /// Reads `rows * dim_bits / 8` bytes in serialized row order.
    pub fn from_le_bytes(rows: usize, dim_bits: usize, bytes: &[u8]) -> Result<Self> {
        if dim_bits == 0 || dim_bits % 8 != 0 {
            return Err(Error::NotByteAligned(dim_bits));
        }
        let row_bytes = dim_bits / 8;
        if bytes.len() != rows * row_bytes {
            return Err(Error::Shape(format!(
                "expected {} packed bytes, got {}",
                rows * row_bytes,
                bytes.len()
            )));
        }
        let wpr = words_per_row(dim_bits);
        let mut words = vec![0u64; rows * wpr];
        for (row, src) in words.chunks_exact_mut(wpr).zip(bytes.chunks_exact(row_bytes)) {
            for (w, chunk) in row.iter_mut().zip(src.chunks(8)) {
                let mut buf = [0u8; 8];
                buf[..chunk.len()].copy_from_slice(chunk);
                *w = u64::from_le_bytes(buf);
            }
        }
        Ok(Self { rows, dim_bits, words })
    }

    pub fn write_le_bytes(&self, out: &mut Vec<u8>) {
        let row_bytes = self.dim_bits / 8;
        for row in self.words.chunks_exact(self.words_per_row()) {
            let start = out.len();
            for w in row {
                out.extend_from_slice(&w.to_le_bytes());
            }
            out.truncate(start + row_bytes);
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim_bits(&self) -> usize {
        self.dim_bits
    }

    pub fn words_per_row(&self) -> usize {
        words_per_row(self.dim_bits)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let wpr = self.words_per_row();
        &self.words[i * wpr..(i + 1) * wpr]
    }

    pub fn bit(&self, row: usize, j: usize) -> bool {
        self.row(row)[j / 64] >> (j % 64) & 1 == 1
    }

    /// Expands every bit to `+1.0` / `-1.0`.
    pub fn unpack_signs(&self) -> TokenEmbeddingMatrix {
        let mut data = Vec::with_capacity(self.rows * self.dim_bits);
        for r in 0..self.rows {
            data.extend((0..self.dim_bits).map(|j| if self.bit(r, j) { 1.0 } else { -1.0 }));
        }
        TokenEmbeddingMatrix::new(self.rows, self.dim_bits, data).expect("packed matrix has a valid shape")
    }

    fn unpack_row_into(&self, r: usize, out: &mut [f32]) {
        let row = self.row(r);
        for (j, x) in out.iter_mut().enumerate() {
            *x = if row[j / 64] >> (j % 64) & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
}

/// Packs the sign of every element.
pub fn binarize(m: &TokenEmbeddingMatrix) -> Result<PackedBinaryMatrix> {
    let dim = m.dim();
    if dim % 8 != 0 {
        return Err(Error::NotByteAligned(dim));
    }
    let wpr = words_per_row(dim);
    let mut words = vec![0u64; m.rows() * wpr];
    for (row, out) in m.iter_rows().zip(words.chunks_exact_mut(wpr)) {
        for (w, chunk) in out.iter_mut().zip(row.chunks(64)) {
            *w = chunk
                .iter()
                .enumerate()
                .fold(0u64, |acc, (b, &x)| acc | (u64::from(x >= 0.0) << b));
        }
    }
    Ok(PackedBinaryMatrix {
        rows: m.rows(),
        dim_bits: dim,
        words,
    })
}

/// Dot product of the `±1` vectors encoded by two packed rows:
/// `dim_bits - 2 * popcount(a ^ b)`.
pub fn packed_dot(a: &[u64], b: &[u64], dim_bits: usize) -> Result<i64> {
    let wpr = words_per_row(dim_bits);
    if a.len() != wpr || b.len() != wpr {
        return Err(Error::DimensionMismatch {
            expected: wpr,
            actual: if a.len() != wpr { a.len() } else { b.len() },
        });
    }
    Ok(packed_dot_unchecked(a, b, dim_bits))
}

#[inline]
fn packed_dot_unchecked(a: &[u64], b: &[u64], dim_bits: usize) -> i64 {
    let hamming: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
    dim_bits as i64 - 2 * i64::from(hamming)
}

/// Whether the query side is binarized too.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinaryMode {
    /// Float query rows against `±1` passage rows.
    #[default]
    Asymmetric,
    /// Both sides binarized; similarity is [`packed_dot`].
    Symmetric,
}

impl fmt::Display for BinaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinaryMode::Asymmetric => "asymmetric",
            BinaryMode::Symmetric => "symmetric",
        })
    }
}

impl FromStr for BinaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymmetric" => Ok(BinaryMode::Asymmetric),
            "symmetric" => Ok(BinaryMode::Symmetric),
            other => Err(Error::invalid(format!("unknown binary mode {other:?}"))),
        }
    }
}

/// A query prepared for binary scoring; symmetric mode binarizes it once.
#[derive(Debug, Clone)]
pub enum BinaryQuery {
    Asymmetric(TokenEmbeddingMatrix),
    Symmetric(PackedBinaryMatrix),
}

impl BinaryQuery {
    pub fn prepare(query: &TokenEmbeddingMatrix, mode: BinaryMode) -> Result<Self> {
        if query.rows() != QUERY_ROWS {
            return Err(Error::QueryRows {
                expected: QUERY_ROWS,
                actual: query.rows(),
            });
        }
        Ok(match mode {
            BinaryMode::Asymmetric => BinaryQuery::Asymmetric(query.clone()),
            BinaryMode::Symmetric => BinaryQuery::Symmetric(binarize(query)?),
        })
    }

    fn dim(&self) -> usize {
        match self {
            BinaryQuery::Asymmetric(q) => q.dim(),
            BinaryQuery::Symmetric(q) => q.dim_bits(),
        }
    }

    pub fn score(&self, passage: &PackedBinaryMatrix) -> Result<f64> {
        if self.dim() != passage.dim_bits() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: passage.dim_bits(),
            });
        }
        if passage.rows() == 0 {
            return Err(Error::EmptyPassage);
        }
        Ok(match self {
            BinaryQuery::Asymmetric(q) => asymmetric_maxsim(q, passage),
            BinaryQuery::Symmetric(qb) => symmetric_maxsim(qb, passage),
        })
    }
}

/// MaxSim of a 32-row query against a packed passage.
pub fn maxsim_binary(query: &TokenEmbeddingMatrix, passage: &PackedBinaryMatrix, mode: BinaryMode) -> Result<f64> {
    BinaryQuery::prepare(query, mode)?.score(passage)
}

// q·sign(d) = Σ_{bit=1} qⱼ − Σ_{bit=0} qⱼ. Each passage row is expanded to ±1
// once and fed through the shared dot kernel, so the result equals dense
// MaxSim over the unpacked passage exactly.
fn asymmetric_maxsim(q: &TokenEmbeddingMatrix, passage: &PackedBinaryMatrix) -> f64 {
    let mut best = vec![f32::NEG_INFINITY; q.rows()];
    let mut signs = vec![0.0f32; passage.dim_bits()];
    for r in 0..passage.rows() {
        passage.unpack_row_into(r, &mut signs);
        for (b, qi) in best.iter_mut().zip(q.iter_rows()) {
            *b = b.max(kernel::dot(qi, &signs));
        }
    }
    best.into_iter().map(f64::from).sum()
}

fn symmetric_maxsim(q: &PackedBinaryMatrix, passage: &PackedBinaryMatrix) -> f64 {
    let dim = q.dim_bits();
    let mut total = 0.0f64;
    for i in 0..q.rows() {
        let qi = q.row(i);
        let best = (0..passage.rows())
            .map(|r| packed_dot_unchecked(qi, passage.row(r), dim))
            .max()
            .expect("passage has rows");
        total += best as f64;
    }
    total
}

/// Payload size of an index under a given storage type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageEstimate {
    pub passage_count: u64,
    pub avg_tokens: f64,
    /// Elements for dense types, bits for [`DType::Bit`].
    pub dim: usize,
    pub dtype: DType,
    pub token_count: u64,
    pub bytes_per_vector: u64,
    pub payload_bytes: u64,
}

impl StorageEstimate {
    /// How many times smaller this payload is than the same tokens stored as
    /// f32 vectors of `reference_dim` elements.
    pub fn ratio_vs_f32(&self, reference_dim: usize) -> f64 {
        let baseline = self.token_count * reference_dim as u64 * 4;
        baseline as f64 / self.payload_bytes as f64
    }
}

pub fn estimate_index_size(passage_count: u64, avg_tokens: f64, dim: usize, dtype: DType) -> Result<StorageEstimate> {
    if passage_count == 0 || !avg_tokens.is_finite() || avg_tokens <= 0.0 || dim == 0 {
        return Err(Error::invalid("passage count, average tokens and dim must be positive"));
    }
    if dtype == DType::Bit && dim % 8 != 0 {
        return Err(Error::NotByteAligned(dim));
    }
    let token_count = (passage_count as f64 * avg_tokens).round() as u64;
    let bytes_per_vector = dtype.bytes_per_vector(dim) as u64;
    Ok(StorageEstimate {
        passage_count,
        avg_tokens,
        dim,
        dtype,
        token_count,
        bytes_per_vector,
        payload_bytes: token_count * bytes_per_vector,
    })
}
