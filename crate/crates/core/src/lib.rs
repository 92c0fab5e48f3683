//! Late-interaction re-ranking of first-stage passage candidates.
//!
//! Token embedding matrices are scored with MaxSim over dense, half precision
//! or sign-binarized storage, or with a poly-encoder style attention score.
//! Passages live in a memory-mapped index keyed by id. The crate also covers
//! TREC run/qrels evaluation, latency benchmarking, and a deterministic
//! synthetic embedder for offline experiments.

pub mod bench;
pub mod cli;
pub mod corpus;
mod error;
pub mod eval;
pub mod index;
mod kernel;
pub mod matrix;
pub mod maxsim;
pub mod polyenc;
pub mod quantize;
pub mod scorer;
pub mod synthembed;

pub use error::{Error, Result};
pub use index::{load_index, DType, PassageRecord, RerankIndex};
pub use matrix::{NormState, SimilarityMetric, TokenEmbeddingMatrix, MAX_PASSAGE_ROWS, QUERY_ROWS};
pub use maxsim::{maxsim_score, rerank, similarity, ScoredCandidate};
pub use polyenc::{attend_codes, poly_rerank, poly_score, softmax, PolyCodes};
pub use quantize::{binarize, estimate_index_size, maxsim_binary, packed_dot, BinaryMode, PackedBinaryMatrix};
pub use scorer::{rerank_with, Scorer, ScorerSpec};
