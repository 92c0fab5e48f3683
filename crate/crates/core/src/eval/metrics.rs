use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::trec::{Qrels, RunFile};

/// nDCG@k with `2^g - 1` gains and `log2(i + 1)` discounts. The ideal DCG is
/// taken over every judged passage of the query, retrieved or not. Unjudged
/// passages count as grade 0. Returns 0 when nothing is relevant or `k == 0`.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judgments: &HashMap<String, u32>, k: usize) -> f64 {
    let gain = |g: u32| 2f64.powi(g as i32) - 1.0;
    let discount = |i: usize| (i as f64 + 1.0).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, pid)| gain(judgments.get(pid.as_ref()).copied().unwrap_or(0)) / discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = judgments.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / discount(i + 1))
        .sum();
    if idcg > 0.0 {
        dcg / idcg
    } else {
        0.0
    }
}

/// Reciprocal rank of the first passage with grade `>= positive_threshold`
/// within the top `k`, or 0.
pub fn mrr_at_k<S: AsRef<str>>(
    ranking: &[S],
    judgments: &HashMap<String, u32>,
    k: usize,
    positive_threshold: u32,
) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|pid| judgments.get(pid.as_ref()).is_some_and(|&g| g >= positive_threshold))
        .map_or(0.0, |i| 1.0 / (i as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryMetrics {
    pub ndcg: f64,
    pub mrr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub k: usize,
    pub positive_threshold: u32,
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub mean_ndcg: f64,
    pub mean_mrr: f64,
    /// Queries in the run that have no judgments at all.
    pub missing_in_qrels: Vec<String>,
    /// Judged queries absent from the run.
    pub missing_in_run: Vec<String>,
    /// Judged queries without a single relevant passage; excluded from means.
    pub no_relevant: Vec<String>,
}

impl MetricReport {
    pub fn query_count(&self) -> usize {
        self.per_query.len()
    }

    pub fn warning_count(&self) -> usize {
        self.missing_in_qrels.len() + self.missing_in_run.len() + self.no_relevant.len()
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "queries\t{}", self.query_count())?;
        writeln!(f, "ndcg@{}\t{:.6}", self.k, self.mean_ndcg)?;
        writeln!(f, "mrr@{}\t{:.6}", self.k, self.mean_mrr)?;
        if !self.missing_in_qrels.is_empty() {
            writeln!(f, "skipped (no judgments)\t{}", self.missing_in_qrels.len())?;
        }
        if !self.missing_in_run.is_empty() {
            writeln!(f, "skipped (not in run)\t{}", self.missing_in_run.len())?;
        }
        if !self.no_relevant.is_empty() {
            writeln!(f, "skipped (no relevant passage)\t{}", self.no_relevant.len())?;
        }
        Ok(())
    }
}

/// Per-query nDCG@k and MRR@k (threshold 1) and their means.
pub fn evaluate_run(run: &RunFile, qrels: &Qrels, k: usize) -> MetricReport {
    evaluate_run_with_threshold(run, qrels, k, 1)
}

pub fn evaluate_run_with_threshold(run: &RunFile, qrels: &Qrels, k: usize, positive_threshold: u32) -> MetricReport {
    let rankings = run.rankings();
    let mut per_query = BTreeMap::new();
    let mut missing_in_qrels = Vec::new();
    let mut no_relevant = Vec::new();
    for (qid, ranking) in &rankings {
        let Some(judgments) = qrels.get(qid) else {
            missing_in_qrels.push(qid.clone());
            continue;
        };
        if judgments.values().all(|&g| g == 0) {
            no_relevant.push(qid.clone());
            continue;
        }
        per_query.insert(
            qid.clone(),
            QueryMetrics {
                ndcg: ndcg_at_k(ranking, judgments, k),
                mrr: mrr_at_k(ranking, judgments, k, positive_threshold),
            },
        );
    }
    let missing_in_run = qrels
        .judgments
        .keys()
        .filter(|q| !rankings.contains_key(*q))
        .cloned()
        .collect();
    let n = per_query.len() as f64;
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if per_query.is_empty() {
            0.0
        } else {
            per_query.values().map(f).sum::<f64>() / n
        }
    };
    MetricReport {
        k,
        positive_threshold,
        mean_ndcg: mean(|m| m.ndcg),
        mean_mrr: mean(|m| m.mrr),
        per_query,
        missing_in_qrels,
        missing_in_run,
        no_relevant,
    }
}
