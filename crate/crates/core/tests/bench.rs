mod common;

use common::{index_from, random_records, rng, unit_matrix};
use lateri::bench::{bench_rank_observed, throughput_report, BenchConfig, StageEvent};
use lateri::scorer::{MaxSimScorer, ScorerSpec};
use lateri::{DType, SimilarityMetric};

#[test]
fn stage_events_bracket_timed_windows() {
    let mut r = rng(21);
    let index = index_from(random_records(&mut r, 40, 1..=8, 16), 16, DType::F16, false);
    let queries: Vec<_> = (0..3).map(|_| unit_matrix(&mut r, 32, 16)).collect();
    let cfg = BenchConfig {
        candidate_count: 25,
        repeats: 4,
        warmup: 2,
        seed: 1,
        threads: 2,
    };
    let scorer = ScorerSpec::MaxSim(MaxSimScorer {
        metric: SimilarityMetric::Dot,
    });
    let mut events = Vec::new();
    let report = bench_rank_observed(&index, &queries, &scorer, &cfg, &mut |e| events.push(e)).unwrap();

    assert_eq!(report.rank.samples, 3 * 4);
    assert_eq!(report.query_prep.samples, 3 * 4);
    assert!(report.rank.p95_ms >= report.rank.median_ms && report.rank.median_ms >= 0.0);
    assert_eq!(events.len(), 3 * (2 + 4 * 6));

    // Every query's records are loaded before its first timed window opens.
    for q in 0..3 {
        let load_end = events
            .iter()
            .position(|e| *e == StageEvent::LoadEnd { query: q })
            .unwrap();
        let first_prep = events
            .iter()
            .position(|e| *e == StageEvent::PrepStart { query: q, iteration: 0 })
            .unwrap();
        assert!(load_end < first_prep);
    }

    // No load ever happens inside an open prep or rank window.
    let mut open = false;
    for e in &events {
        match e {
            StageEvent::PrepStart { .. } | StageEvent::RankStart { .. } => open = true,
            StageEvent::PrepEnd { .. } | StageEvent::RankEnd { .. } => open = false,
            StageEvent::LoadStart { .. } | StageEvent::LoadEnd { .. } => assert!(!open),
        }
    }

    let t = throughput_report(&report).unwrap();
    assert_eq!(t.threads, 2);
    assert!((t.ideal_qps - 2.0 * t.per_worker_qps).abs() < 1e-9);
}

#[test]
fn bench_rejects_bad_configs() {
    let mut r = rng(22);
    let index = index_from(random_records(&mut r, 5, 1..=2, 8), 8, DType::F32, false);
    let queries = vec![unit_matrix(&mut r, 32, 8)];
    let scorer = ScorerSpec::MaxSim(MaxSimScorer {
        metric: SimilarityMetric::NegL2Squared,
    });
    let too_many = BenchConfig {
        candidate_count: 6,
        ..BenchConfig::default()
    };
    assert!(bench_rank_observed(&index, &queries, &scorer, &too_many, &mut |_| {}).is_err());
    let no_repeats = BenchConfig {
        candidate_count: 2,
        repeats: 0,
        ..BenchConfig::default()
    };
    assert!(bench_rank_observed(&index, &queries, &scorer, &no_repeats, &mut |_| {}).is_err());
}

#[test]
fn vectorize_cost_tracks_passage_length() {
    use lateri::bench::bench_vectorize;
    use lateri::synthembed::SynthConfig;

    let cfg = SynthConfig::new(128, 2, 0.3).unwrap();
    let passages = |len: usize| -> Vec<Vec<String>> {
        (0..200)
            .map(|p| (0..len).map(|t| format!("w{p}_{t}")).collect())
            .collect()
    };
    let short = bench_vectorize(&cfg, &passages(90), 7).unwrap();
    let long = bench_vectorize(&cfg, &passages(180), 7).unwrap();
    let ratio = long.ms_per_passage.median_ms / short.ms_per_passage.median_ms;
    assert!((1.3..=3.0).contains(&ratio), "ratio {ratio}");
}
