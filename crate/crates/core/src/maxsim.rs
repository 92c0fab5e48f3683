//! MaxSim late-interaction scoring over token embedding matrices.
//!
//! ```text
//! maxsim(Q, D) = Σᵢ maxⱼ sim(Qᵢ, Dⱼ)
//! ```
//!
//! The per-row maxima are accumulated in ascending query-row order into an
//! `f64`, so a score is bit-for-bit reproducible regardless of how candidates
//! are batched or which thread scores them. Passage row order never matters.

use crate::error::{Error, Result};
use crate::index::RerankIndex;
use crate::kernel;
use crate::matrix::{row_norm, NormState, SimilarityMetric, TokenEmbeddingMatrix, NORM_TOLERANCE, QUERY_ROWS};
use crate::scorer::{rerank_with, MaxSimScorer};

/// One entry of a ranked result list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub passage_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Similarity of two vectors under `metric`.
pub fn similarity(u: &[f32], v: &[f32], metric: SimilarityMetric) -> Result<f32> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(match metric {
        SimilarityMetric::NegL2Squared => kernel::neg_l2_squared(u, v),
        SimilarityMetric::Dot => kernel::dot(u, v),
        SimilarityMetric::Cosine => {
            let (nu, nv) = (row_norm(u), row_norm(v));
            if (nu - 1.0).abs() > NORM_TOLERANCE || (nv - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::NotNormalized);
            }
            kernel::dot(u, v) / (nu * nv)
        }
    })
}

/// Passes a query matrix through unchanged if it has exactly 32 rows.
pub fn validate_query_matrix(m: TokenEmbeddingMatrix) -> Result<TokenEmbeddingMatrix> {
    if m.rows() != QUERY_ROWS {
        return Err(Error::QueryRows {
            expected: QUERY_ROWS,
            actual: m.rows(),
        });
    }
    Ok(m)
}

/// MaxSim score of a 32-row query against a passage.
pub fn maxsim_score(
    query: &TokenEmbeddingMatrix,
    passage: &TokenEmbeddingMatrix,
    metric: SimilarityMetric,
) -> Result<f64> {
    if query.rows() != QUERY_ROWS {
        return Err(Error::QueryRows {
            expected: QUERY_ROWS,
            actual: query.rows(),
        });
    }
    check_pair(query, passage, metric)?;
    Ok(maxsim_unchecked(query, passage, metric))
}

pub(crate) fn check_pair(
    query: &TokenEmbeddingMatrix,
    passage: &TokenEmbeddingMatrix,
    metric: SimilarityMetric,
) -> Result<()> {
    if query.dim() != passage.dim() {
        return Err(Error::DimensionMismatch {
            expected: query.dim(),
            actual: passage.dim(),
        });
    }
    if passage.rows() == 0 {
        return Err(Error::EmptyPassage);
    }
    if metric == SimilarityMetric::Cosine
        && (query.norm_state() != NormState::L2Normalized || passage.norm_state() != NormState::L2Normalized)
    {
        return Err(Error::NotNormalized);
    }
    Ok(())
}

/// Shape and normalization must already be checked. Cosine reduces to the dot
/// product on unit rows.
pub(crate) fn maxsim_unchecked(
    query: &TokenEmbeddingMatrix,
    passage: &TokenEmbeddingMatrix,
    metric: SimilarityMetric,
) -> f64 {
    let sim: fn(&[f32], &[f32]) -> f32 = match metric {
        SimilarityMetric::NegL2Squared => kernel::neg_l2_squared,
        SimilarityMetric::Dot | SimilarityMetric::Cosine => kernel::dot,
    };
    let mut total = 0.0f64;
    for q in query.iter_rows() {
        let best = passage.iter_rows().map(|d| sim(q, d)).fold(f32::NEG_INFINITY, f32::max);
        total += f64::from(best);
    }
    total
}

/// Scores every candidate with MaxSim and returns them best-first.
pub fn rerank<S: AsRef<str> + Sync>(
    query: &TokenEmbeddingMatrix,
    candidates: &[S],
    index: &RerankIndex,
    metric: SimilarityMetric,
) -> Result<Vec<ScoredCandidate>> {
    rerank_with(&MaxSimScorer { metric }, query, candidates, index)
}

/// Sorts by score descending, ties by ascending passage id, and assigns ranks.
pub fn rank_scores(mut scored: Vec<(String, f64)>) -> Vec<ScoredCandidate> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (passage_id, score))| ScoredCandidate {
            passage_id,
            score,
            rank: i + 1,
        })
        .collect()
}
