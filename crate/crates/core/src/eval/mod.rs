//! Qrels and run-file handling plus nDCG@k / MRR@k.

mod metrics;
mod trec;

pub use metrics::{evaluate_run, evaluate_run_with_threshold, mrr_at_k, ndcg_at_k, MetricReport, QueryMetrics};
pub use trec::{
    format_run, parse_candidates, parse_qrels, parse_qrels_str, parse_run, parse_run_str, qid_order, write_run,
    CandidateSet, Qrels, RunFile, RunResults, RunRow,
};
