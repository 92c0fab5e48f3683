//! Latency harness: per-query ranking time over a fixed number of candidates,
//! and per-passage vectorization time for the synthetic embedder.
//!
//! Candidate records are fetched from the index before the clock starts, so
//! `rank_ms` covers scoring and sorting of vectors already in memory. Query
//! preparation (binarizing a query, attending poly codes) is timed
//! separately as `query_prep_ms`. Each query is measured as a single-query
//! batch. The workload (query order, sampled candidates) depends only on the
//! seed.

use std::fmt::{self, Write as _};
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{DType, PassageRecord, RerankIndex};
use crate::matrix::TokenEmbeddingMatrix;
use crate::scorer::{rank_records, Scorer, ScorerSpec};
use crate::synthembed::{synth_embed, SynthConfig};

pub const DEFAULT_CANDIDATES: usize = 1000;
pub const DEFAULT_WARMUP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub candidate_count: usize,
    /// Measured iterations per query, after warmup.
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            candidate_count: DEFAULT_CANDIDATES,
            repeats: 5,
            warmup: DEFAULT_WARMUP,
            seed: 0,
            threads: 1,
        }
    }
}

impl BenchConfig {
    fn check(&self) -> Result<()> {
        if self.candidate_count == 0 {
            return Err(Error::invalid("candidate count must be positive"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be positive"));
        }
        if self.threads == 0 {
            return Err(Error::invalid("thread count must be positive"));
        }
        Ok(())
    }
}

/// Candidate ids for each query, in query order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub candidates: Vec<Vec<String>>,
}

/// Draws `candidate_count` distinct passages per query from the index.
pub fn sample_workload(index: &RerankIndex, query_count: usize, candidate_count: usize, seed: u64) -> Result<Workload> {
    if candidate_count == 0 {
        return Err(Error::invalid("candidate count must be positive"));
    }
    if index.len() < candidate_count {
        return Err(Error::invalid(format!(
            "index holds {} passages, {candidate_count} candidates requested",
            index.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = index.entries();
    let candidates = (0..query_count)
        .map(|_| {
            sample(&mut rng, entries.len(), candidate_count)
                .into_iter()
                .map(|i| entries[i].id.clone())
                .collect()
        })
        .collect();
    Ok(Workload { candidates })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageStats {
    pub median_ms: f64,
    pub p95_ms: f64,
    pub samples: usize,
}

impl StageStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n == 0 {
            return Self {
                median_ms: 0.0,
                p95_ms: 0.0,
                samples: 0,
            };
        }
        let median_ms = if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        };
        // nearest-rank
        let p95_ms = s[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            median_ms,
            p95_ms,
            samples: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub scorer: String,
    pub candidate_count: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub thread_count: usize,
    pub query_count: usize,
    pub dtype: DType,
    pub dim: usize,
    pub query_prep: StageStats,
    pub rank: StageStats,
}

impl LatencyReport {
    /// One `key=value` line per stage.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for (stage, s) in [("query_prep", &self.query_prep), ("rank", &self.rank)] {
            writeln!(
                out,
                "stage={stage} scorer={} dtype={} dim={} candidates={} queries={} repeats={} warmup={} threads={} samples={} median_ms={:.4} p95_ms={:.4}",
                self.scorer,
                self.dtype,
                self.dim,
                self.candidate_count,
                self.query_count,
                self.repeats,
                self.warmup,
                self.thread_count,
                s.samples,
                s.median_ms,
                s.p95_ms
            )
            .unwrap();
        }
        out
    }
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} ({} {}, {} candidates, {} threads)",
            self.scorer, self.dtype, self.dim, self.candidate_count, self.thread_count
        )?;
        writeln!(
            f,
            "{:<12} {:>12} {:>12} {:>8}",
            "stage", "median ms", "p95 ms", "samples"
        )?;
        for (stage, s) in [("query prep", &self.query_prep), ("rank", &self.rank)] {
            writeln!(
                f,
                "{stage:<12} {:>12.3} {:>12.3} {:>8}",
                s.median_ms, s.p95_ms, s.samples
            )?;
        }
        Ok(())
    }
}

/// Stage boundaries reported to an optional observer. Observer calls happen
/// outside every timed window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageEvent {
    LoadStart { query: usize },
    LoadEnd { query: usize },
    PrepStart { query: usize, iteration: usize },
    PrepEnd { query: usize, iteration: usize },
    RankStart { query: usize, iteration: usize },
    RankEnd { query: usize, iteration: usize },
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn bench_rank(
    index: &RerankIndex,
    queries: &[TokenEmbeddingMatrix],
    scorer: &ScorerSpec,
    cfg: &BenchConfig,
) -> Result<LatencyReport> {
    bench_rank_observed(index, queries, scorer, cfg, &mut |_| {})
}

pub fn bench_rank_observed(
    index: &RerankIndex,
    queries: &[TokenEmbeddingMatrix],
    scorer: &ScorerSpec,
    cfg: &BenchConfig,
    observe: &mut dyn FnMut(StageEvent),
) -> Result<LatencyReport> {
    cfg.check()?;
    if queries.is_empty() {
        return Err(Error::invalid("no queries to benchmark"));
    }
    let workload = sample_workload(index, queries.len(), cfg.candidate_count, cfg.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    let mut prep_ms = Vec::with_capacity(queries.len() * cfg.repeats);
    let mut rank_ms = Vec::with_capacity(queries.len() * cfg.repeats);
    for (qi, (query, ids)) in queries.iter().zip(&workload.candidates).enumerate() {
        observe(StageEvent::LoadStart { query: qi });
        let records: Vec<(String, PassageRecord)> = ids
            .iter()
            .map(|id| Ok((id.clone(), index.get_passage(id)?)))
            .collect::<Result<_>>()?;
        observe(StageEvent::LoadEnd { query: qi });

        for it in 0..cfg.warmup + cfg.repeats {
            observe(StageEvent::PrepStart {
                query: qi,
                iteration: it,
            });
            let t = Instant::now();
            let prepared = scorer.prepare(query)?;
            scorer.check_index(&prepared, index.dtype(), index.dim())?;
            let prep = elapsed_ms(t);
            observe(StageEvent::PrepEnd {
                query: qi,
                iteration: it,
            });

            observe(StageEvent::RankStart {
                query: qi,
                iteration: it,
            });
            let t = Instant::now();
            let ranked = pool.install(|| rank_records(scorer, &prepared, &records))?;
            let rank = elapsed_ms(t);
            std::hint::black_box(&ranked);
            observe(StageEvent::RankEnd {
                query: qi,
                iteration: it,
            });

            if it >= cfg.warmup {
                prep_ms.push(prep);
                rank_ms.push(rank);
            }
        }
    }

    Ok(LatencyReport {
        scorer: scorer.to_string(),
        candidate_count: cfg.candidate_count,
        repeats: cfg.repeats,
        warmup: cfg.warmup,
        thread_count: cfg.threads,
        query_count: queries.len(),
        dtype: index.dtype(),
        dim: index.dim(),
        query_prep: StageStats::from_samples(&prep_ms),
        rank: StageStats::from_samples(&rank_ms),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorizeReport {
    pub passages: usize,
    pub repeats: usize,
    pub ms_per_passage: StageStats,
}

/// Times the synthetic embedder over a passage set, one warmup pass first.
pub fn bench_vectorize<S: AsRef<str>>(
    cfg: &SynthConfig,
    passages: &[Vec<S>],
    repeats: usize,
) -> Result<VectorizeReport> {
    if passages.is_empty() {
        return Err(Error::invalid("no passages to vectorize"));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be positive"));
    }
    let mut samples = Vec::with_capacity(repeats);
    for it in 0..=repeats {
        let t = Instant::now();
        for p in passages {
            std::hint::black_box(synth_embed(p, cfg, false)?);
        }
        if it > 0 {
            samples.push(elapsed_ms(t) / passages.len() as f64);
        }
    }
    Ok(VectorizeReport {
        passages: passages.len(),
        repeats,
        ms_per_passage: StageStats::from_samples(&samples),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    /// Queries per second for one worker running queries back to back.
    pub per_worker_qps: f64,
    pub threads: usize,
    /// `per_worker_qps * threads`: assumes perfect scaling, an upper bound.
    pub ideal_qps: f64,
}

impl fmt::Display for Throughput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.1} q/s per worker, {:.1} q/s ideal upper bound at {} threads",
            self.per_worker_qps, self.ideal_qps, self.threads
        )
    }
}

pub fn throughput_report(latency: &LatencyReport) -> Result<Throughput> {
    let total = latency.query_prep.median_ms + latency.rank.median_ms;
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::invalid("latency must be positive to derive throughput"));
    }
    let per_worker_qps = 1000.0 / total;
    Ok(Throughput {
        per_worker_qps,
        threads: latency.thread_count,
        ideal_qps: per_worker_qps * latency.thread_count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(prep: f64, rank: f64, threads: usize) -> LatencyReport {
        let s = |m| StageStats {
            median_ms: m,
            p95_ms: m,
            samples: 1,
        };
        LatencyReport {
            scorer: "test".into(),
            candidate_count: 1000,
            repeats: 1,
            warmup: 0,
            thread_count: threads,
            query_count: 1,
            dtype: DType::F32,
            dim: 64,
            query_prep: s(prep),
            rank: s(rank),
        }
    }

    #[test]
    fn throughput_arithmetic() {
        assert!((throughput_report(&report(5.0, 15.0, 1)).unwrap().per_worker_qps - 50.0).abs() < 1e-12);
        let t8 = throughput_report(&report(5.0, 15.0, 8)).unwrap();
        assert!((t8.ideal_qps - 400.0).abs() < 1e-9);
        let gpu_row = throughput_report(&report(15.0, 15.0, 1)).unwrap();
        assert!((gpu_row.per_worker_qps - 33.333).abs() < 1e-3);
        assert!(throughput_report(&report(0.0, 0.0, 1)).is_err());
    }

    #[test]
    fn stats_percentiles() {
        let s = StageStats::from_samples(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(s.median_ms, 3.0);
        assert_eq!(s.p95_ms, 5.0);
        let s = StageStats::from_samples(&[1.0, 2.0]);
        assert_eq!(s.median_ms, 1.5);
        let many: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(StageStats::from_samples(&many).p95_ms, 95.0);
    }

    #[test]
    fn vectorize_argument_errors() {
        let cfg = SynthConfig::new(8, 0, 0.0).unwrap();
        assert!(bench_vectorize::<&str>(&cfg, &[], 3).is_err());
        assert!(bench_vectorize(&cfg, &[vec!["a"]], 0).is_err());
        let r = bench_vectorize(&cfg, &vec![vec!["a", "b"]; 10], 2).unwrap();
        assert!(r.ms_per_passage.median_ms.is_finite() && r.ms_per_passage.median_ms > 0.0);
    }
}
