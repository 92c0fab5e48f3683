//! A common shape for the three scoring families: prepare the query once,
//! then score any number of passage records against it.
//!
//! Splitting the two stages is what lets the benchmark time query preparation
//! and ranking separately, and lets [`rerank_with`] share one prepared query
//! across worker threads.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{DType, PassageRecord, RerankIndex};
use crate::matrix::{NormState, SimilarityMetric, TokenEmbeddingMatrix, QUERY_ROWS};
use crate::maxsim::{maxsim_unchecked, rank_scores, ScoredCandidate};
use crate::polyenc::{attend_codes, poly_score, PolyCodes};
use crate::quantize::{BinaryMode, BinaryQuery};

pub trait Scorer: Sync {
    type Prepared: Send + Sync;

    fn prepare(&self, query: &TokenEmbeddingMatrix) -> Result<Self::Prepared>;

    /// Rejects an index whose storage type or width cannot be scored.
    fn check_index(&self, prepared: &Self::Prepared, dtype: DType, dim: usize) -> Result<()>;

    fn score(&self, prepared: &Self::Prepared, passage: &PassageRecord) -> Result<f64>;
}

fn expect_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

fn expect_dense(dtype: DType, family: &str) -> Result<()> {
    if dtype == DType::Bit {
        return Err(Error::Incompatible(format!(
            "{family} scoring needs a dense index, got packed bits"
        )));
    }
    Ok(())
}

/// Dense MaxSim.
#[derive(Debug, Clone, Copy)]
pub struct MaxSimScorer {
    pub metric: SimilarityMetric,
}

impl Scorer for MaxSimScorer {
    type Prepared = TokenEmbeddingMatrix;

    fn prepare(&self, query: &TokenEmbeddingMatrix) -> Result<TokenEmbeddingMatrix> {
        if query.rows() != QUERY_ROWS {
            return Err(Error::QueryRows {
                expected: QUERY_ROWS,
                actual: query.rows(),
            });
        }
        let query = query.clone();
        if self.metric == SimilarityMetric::Cosine {
            return query.with_norm_state(NormState::L2Normalized);
        }
        Ok(query)
    }

    fn check_index(&self, q: &TokenEmbeddingMatrix, dtype: DType, dim: usize) -> Result<()> {
        expect_dense(dtype, "maxsim")?;
        expect_dim(q.dim(), dim)
    }

    fn score(&self, q: &TokenEmbeddingMatrix, passage: &PassageRecord) -> Result<f64> {
        let PassageRecord::Dense(d) = passage else {
            return Err(Error::Incompatible("maxsim scoring got a packed record".into()));
        };
        expect_dim(q.dim(), d.dim())?;
        if d.rows() == 0 {
            return Err(Error::EmptyPassage);
        }
        if self.metric == SimilarityMetric::Cosine && d.norm_state() != NormState::L2Normalized && !d.has_unit_rows() {
            return Err(Error::NotNormalized);
        }
        Ok(maxsim_unchecked(q, d, self.metric))
    }
}

/// MaxSim over sign-binarized passages.
#[derive(Debug, Clone, Copy, Default)]
pub struct BinaryMaxSimScorer {
    pub mode: BinaryMode,
}

impl Scorer for BinaryMaxSimScorer {
    type Prepared = BinaryQuery;

    fn prepare(&self, query: &TokenEmbeddingMatrix) -> Result<BinaryQuery> {
        BinaryQuery::prepare(query, self.mode)
    }

    fn check_index(&self, q: &BinaryQuery, dtype: DType, dim: usize) -> Result<()> {
        if dtype != DType::Bit {
            return Err(Error::Incompatible(format!(
                "binary scoring needs a packed index, got {dtype}"
            )));
        }
        let qdim = match q {
            BinaryQuery::Asymmetric(m) => m.dim(),
            BinaryQuery::Symmetric(p) => p.dim_bits(),
        };
        expect_dim(qdim, dim)
    }

    fn score(&self, q: &BinaryQuery, passage: &PassageRecord) -> Result<f64> {
        let PassageRecord::Packed(d) = passage else {
            return Err(Error::Incompatible("binary scoring got a dense record".into()));
        };
        q.score(d)
    }
}

/// Poly-encoder over single-vector passages.
#[derive(Debug, Clone)]
pub struct PolyScorer {
    pub codes: PolyCodes,
    /// Scale each candidate vector to unit length before scoring.
    pub normalize_candidate: bool,
}

impl Scorer for PolyScorer {
    type Prepared = TokenEmbeddingMatrix;

    fn prepare(&self, query: &TokenEmbeddingMatrix) -> Result<TokenEmbeddingMatrix> {
        attend_codes(query, &self.codes)
    }

    fn check_index(&self, ctx: &TokenEmbeddingMatrix, dtype: DType, dim: usize) -> Result<()> {
        expect_dense(dtype, "poly")?;
        expect_dim(ctx.dim(), dim)
    }

    fn score(&self, ctx: &TokenEmbeddingMatrix, passage: &PassageRecord) -> Result<f64> {
        let PassageRecord::Dense(d) = passage else {
            return Err(Error::Incompatible("poly scoring got a packed record".into()));
        };
        if d.rows() != 1 {
            return Err(Error::Incompatible(format!(
                "poly scoring needs single-vector records, got {} rows",
                d.rows()
            )));
        }
        if self.normalize_candidate {
            let unit = d.clone().l2_normalize()?;
            return poly_score(ctx, unit.row(0));
        }
        poly_score(ctx, d.row(0))
    }
}

/// Any of the supported scorers, selected at runtime.
#[derive(Debug, Clone)]
pub enum ScorerSpec {
    MaxSim(MaxSimScorer),
    Binary(BinaryMaxSimScorer),
    Poly(PolyScorer),
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::MaxSim(s) => write!(f, "maxsim-{}", s.metric),
            ScorerSpec::Binary(s) => write!(f, "maxsim-binary-{}", s.mode),
            ScorerSpec::Poly(s) => write!(f, "poly{}", s.codes.m()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum PreparedQuery {
    Dense(TokenEmbeddingMatrix),
    Binary(BinaryQuery),
    Poly(TokenEmbeddingMatrix),
}

impl Scorer for ScorerSpec {
    type Prepared = PreparedQuery;

    fn prepare(&self, query: &TokenEmbeddingMatrix) -> Result<PreparedQuery> {
        Ok(match self {
            ScorerSpec::MaxSim(s) => PreparedQuery::Dense(s.prepare(query)?),
            ScorerSpec::Binary(s) => PreparedQuery::Binary(s.prepare(query)?),
            ScorerSpec::Poly(s) => PreparedQuery::Poly(s.prepare(query)?),
        })
    }

    fn check_index(&self, prepared: &PreparedQuery, dtype: DType, dim: usize) -> Result<()> {
        match (self, prepared) {
            (ScorerSpec::MaxSim(s), PreparedQuery::Dense(q)) => s.check_index(q, dtype, dim),
            (ScorerSpec::Binary(s), PreparedQuery::Binary(q)) => s.check_index(q, dtype, dim),
            (ScorerSpec::Poly(s), PreparedQuery::Poly(q)) => s.check_index(q, dtype, dim),
            _ => Err(Error::invalid("prepared query belongs to another scorer")),
        }
    }

    fn score(&self, prepared: &PreparedQuery, passage: &PassageRecord) -> Result<f64> {
        match (self, prepared) {
            (ScorerSpec::MaxSim(s), PreparedQuery::Dense(q)) => s.score(q, passage),
            (ScorerSpec::Binary(s), PreparedQuery::Binary(q)) => s.score(q, passage),
            (ScorerSpec::Poly(s), PreparedQuery::Poly(q)) => s.score(q, passage),
            _ => Err(Error::invalid("prepared query belongs to another scorer")),
        }
    }
}

/// Checks that every candidate exists in the index exactly once.
pub(crate) fn check_candidates<S: AsRef<str>>(candidates: &[S], index: &RerankIndex) -> Result<()> {
    let mut seen = HashSet::with_capacity(candidates.len());
    for c in candidates {
        let id = c.as_ref();
        if !index.contains(id) {
            return Err(Error::UnknownPassage(id.to_string()));
        }
        if !seen.insert(id) {
            return Err(Error::DuplicatePassage(id.to_string()));
        }
    }
    Ok(())
}

/// Scores pre-fetched records and ranks them. Records are scored in parallel
/// on the current rayon pool; the first error in input order wins.
pub fn rank_records<S: Scorer>(
    scorer: &S,
    prepared: &S::Prepared,
    records: &[(String, PassageRecord)],
) -> Result<Vec<ScoredCandidate>> {
    let scored: Vec<Result<(String, f64)>> = records
        .par_iter()
        .map(|(id, rec)| Ok((id.clone(), scorer.score(prepared, rec)?)))
        .collect();
    Ok(rank_scores(scored.into_iter().collect::<Result<_>>()?))
}

/// Re-ranks `candidates` from `index` with any scorer.
///
/// The output is a permutation of the candidate ids sorted by score
/// descending, ties broken by ascending id, and does not depend on the input
/// order.
pub fn rerank_with<S: Scorer, C: AsRef<str> + Sync>(
    scorer: &S,
    query: &TokenEmbeddingMatrix,
    candidates: &[C],
    index: &RerankIndex,
) -> Result<Vec<ScoredCandidate>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    check_candidates(candidates, index)?;
    let prepared = scorer.prepare(query)?;
    scorer.check_index(&prepared, index.dtype(), index.dim())?;
    let scored: Vec<Result<(String, f64)>> = candidates
        .par_iter()
        .map(|c| {
            let id = c.as_ref();
            let rec = index.get_passage(id)?;
            Ok((id.to_string(), scorer.score(&prepared, &rec)?))
        })
        .collect();
    Ok(rank_scores(scored.into_iter().collect::<Result<_>>()?))
}
