//! Poly-encoder scoring.
//!
//! `m` learned codes attend over the query tokens to produce `m` context
//! vectors; each candidate's single vector then attends over those contexts
//! and the score is the dot product of the candidate with the attended query
//! vector. The code attention depends only on the query, so it runs once per
//! query and is shared read-only by every candidate.
//!
//! Attention arithmetic is carried out in `f64`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{read_shard, RerankIndex};
use crate::matrix::TokenEmbeddingMatrix;
use crate::maxsim::ScoredCandidate;
use crate::scorer::{rerank_with, PolyScorer};

/// Record id of the code matrix inside a shard file.
pub const CODES_RECORD_ID: &str = "polycodes";

#[derive(Debug, Clone, PartialEq)]
pub struct PolyCodes {
    m: usize,
    dim: usize,
    weights: Vec<f32>,
}

impl PolyCodes {
    pub fn new(m: usize, dim: usize, weights: Vec<f32>) -> Result<Self> {
        if m == 0 || dim == 0 || weights.len() != m * dim {
            return Err(Error::Shape(format!(
                "poly codes need m*dim = {m}*{dim} weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("poly code weights must be finite"));
        }
        Ok(Self { m, dim, weights })
    }

    pub fn from_matrix(m: &TokenEmbeddingMatrix) -> Result<Self> {
        Self::new(m.rows(), m.dim(), m.as_slice().to_vec())
    }

    /// Seeded pseudo-random codes in `[-1, 1)`, for tests and benchmarks.
    pub fn random(m: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..m * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        Self::new(m, dim, weights)
    }

    /// Loads the `polycodes` record from a shard file.
    pub fn load(path: &Path) -> Result<Self> {
        let shard = read_shard(path)?;
        let record = shard
            .records
            .iter()
            .find(|r| r.id == CODES_RECORD_ID)
            .ok_or_else(|| Error::UnknownPassage(CODES_RECORD_ID.to_string()))?;
        Self::from_matrix(&record.matrix)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn code(&self, i: usize) -> &[f32] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_matrix(&self) -> TokenEmbeddingMatrix {
        TokenEmbeddingMatrix::new(self.m, self.dim, self.weights.clone()).expect("codes have a valid shape")
    }
}

/// In-place numerically stable softmax.
pub fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in logits.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in logits.iter_mut() {
        *x /= sum;
    }
}

fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}

/// Each code attends over the token rows; returns an `m × dim` context matrix.
pub fn attend_codes(tokens: &TokenEmbeddingMatrix, codes: &PolyCodes) -> Result<TokenEmbeddingMatrix> {
    if tokens.dim() != codes.dim() {
        return Err(Error::DimensionMismatch {
            expected: codes.dim(),
            actual: tokens.dim(),
        });
    }
    let dim = codes.dim();
    let mut out = Vec::with_capacity(codes.m() * dim);
    let mut weights = vec![0.0f64; tokens.rows()];
    let mut acc = vec![0.0f64; dim];
    for i in 0..codes.m() {
        let code = codes.code(i);
        for (w, t) in weights.iter_mut().zip(tokens.iter_rows()) {
            *w = dot64(code, t);
        }
        softmax(&mut weights);
        acc.fill(0.0);
        for (w, t) in weights.iter().zip(tokens.iter_rows()) {
            for (a, x) in acc.iter_mut().zip(t) {
                *a += w * f64::from(*x);
            }
        }
        out.extend(acc.iter().map(|&a| a as f32));
    }
    TokenEmbeddingMatrix::new(codes.m(), dim, out)
}

/// Candidate-side attention over the context rows followed by a dot product.
pub fn poly_score(context: &TokenEmbeddingMatrix, candidate: &[f32]) -> Result<f64> {
    if context.dim() != candidate.len() {
        return Err(Error::DimensionMismatch {
            expected: context.dim(),
            actual: candidate.len(),
        });
    }
    let mut logits: Vec<f64> = context.iter_rows().map(|c| dot64(candidate, c)).collect();
    // q · cand = Σᵢ vᵢ (contextᵢ · cand), and the logits are exactly those dots.
    let dots = logits.clone();
    softmax(&mut logits);
    Ok(logits.iter().zip(&dots).map(|(v, d)| v * d).sum())
}

/// Scores single-vector passages against a query and returns them best-first.
pub fn poly_rerank<S: AsRef<str> + Sync>(
    tokens: &TokenEmbeddingMatrix,
    codes: &PolyCodes,
    candidates: &[S],
    index: &RerankIndex,
) -> Result<Vec<ScoredCandidate>> {
    let scorer = PolyScorer {
        codes: codes.clone(),
        normalize_candidate: false,
    };
    rerank_with(&scorer, tokens, candidates, index)
}
