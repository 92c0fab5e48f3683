//! Token embedding matrices and the similarity metrics defined over their rows.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Fixed query length. Shorter queries are padded by the encoder, never here.
pub const QUERY_ROWS: usize = 32;

/// Maximum passage length in tokens.
pub const MAX_PASSAGE_ROWS: usize = 192;

/// Allowed deviation of a row norm from 1.0 for a matrix to count as l2-normalized.
pub const NORM_TOLERANCE: f32 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormState {
    #[default]
    Raw,
    L2Normalized,
}

/// Similarity between two token vectors. Larger is always better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimilarityMetric {
    /// `-Σ(uᵢ - vᵢ)²`; rank-equivalent to L2 distance without the square root.
    NegL2Squared,
    Dot,
    /// Requires l2-normalized operands.
    Cosine,
}

impl SimilarityMetric {
    pub const ALL: [SimilarityMetric; 3] = [
        SimilarityMetric::NegL2Squared,
        SimilarityMetric::Dot,
        SimilarityMetric::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityMetric::NegL2Squared => "l2",
            SimilarityMetric::Dot => "dot",
            SimilarityMetric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" | "neg_l2_squared" => Ok(SimilarityMetric::NegL2Squared),
            "dot" => Ok(SimilarityMetric::Dot),
            "cosine" => Ok(SimilarityMetric::Cosine),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

/// Row-major matrix of token vectors: one row per token.
///
/// Elements are always held in single precision; half-precision sources are
/// widened on read.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    norm_state: NormState,
}

impl TokenEmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::Shape(format!("rows and dim must be positive, got {rows}x{dim}")));
        }
        if data.len() != rows * dim {
            return Err(Error::Shape(format!(
                "{rows}x{dim} matrix needs {} elements, got {}",
                rows * dim,
                data.len()
            )));
        }
        Ok(Self {
            rows,
            dim,
            data,
            norm_state: NormState::Raw,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, data)
    }

    /// Declares the normalization state, verifying unit rows when claiming
    /// [`NormState::L2Normalized`].
    pub fn with_norm_state(mut self, state: NormState) -> Result<Self> {
        if state == NormState::L2Normalized && !self.has_unit_rows() {
            return Err(Error::NotNormalized);
        }
        self.norm_state = state;
        Ok(self)
    }

    /// Marks the matrix l2-normalized if every row already is; otherwise
    /// leaves it raw.
    pub fn detect_norm_state(mut self) -> Self {
        if self.has_unit_rows() {
            self.norm_state = NormState::L2Normalized;
        }
        self
    }

    /// Scales every row to unit length. Zero rows cannot be normalized.
    pub fn l2_normalize(mut self) -> Result<Self> {
        let dim = self.dim;
        for row in self.data.chunks_exact_mut(dim) {
            let norm = row_norm(row);
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::Shape("cannot normalize a zero row".into()));
            }
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
        self.norm_state = NormState::L2Normalized;
        Ok(self)
    }

    pub fn has_unit_rows(&self) -> bool {
        self.iter_rows().all(|r| (row_norm(r) - 1.0).abs() <= NORM_TOLERANCE)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_state(&self) -> NormState {
        self.norm_state
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }
}

pub(crate) fn row_norm(row: &[f32]) -> f32 {
    row.iter().map(|x| x * x).sum::<f32>().sqrt()
}
