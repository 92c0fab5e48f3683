#![allow(dead_code)]

use std::collections::BTreeMap;

use lateri::index::{encode_index, BuildOptions};
use lateri::{DType, PassageRecord, RerankIndex, TokenEmbeddingMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, dim: usize) -> TokenEmbeddingMatrix {
    let data = (0..rows * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    TokenEmbeddingMatrix::new(rows, dim, data).unwrap()
}

pub fn unit_matrix(rng: &mut impl Rng, rows: usize, dim: usize) -> TokenEmbeddingMatrix {
    random_matrix(rng, rows, dim).l2_normalize().unwrap()
}

/// Passage ids `p0000..`, each with a random row count in `rows`.
pub fn random_records(
    rng: &mut impl Rng,
    count: usize,
    rows: std::ops::RangeInclusive<usize>,
    dim: usize,
) -> BTreeMap<String, PassageRecord> {
    (0..count)
        .map(|i| {
            let r = rng.gen_range(rows.clone());
            (format!("p{i:04}"), PassageRecord::Dense(random_matrix(rng, r, dim)))
        })
        .collect()
}

pub fn index_from(records: BTreeMap<String, PassageRecord>, dim: usize, dtype: DType, quantize: bool) -> RerankIndex {
    let (bytes, _) = encode_index(records, dim, BuildOptions { dtype, quantize }).unwrap();
    RerankIndex::from_bytes(bytes).unwrap()
}

/// Naive f64 MaxSim straight from the definition.
pub fn naive_maxsim(q: &TokenEmbeddingMatrix, d: &TokenEmbeddingMatrix, metric: lateri::SimilarityMetric) -> f64 {
    use lateri::SimilarityMetric::*;
    let sim = |a: &[f32], b: &[f32]| -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
        match metric {
            Dot => dot,
            NegL2Squared => -a
                .iter()
                .zip(b)
                .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
                .sum::<f64>(),
            Cosine => {
                let na = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                dot / (na * nb)
            }
        }
    };
    let mut total = 0.0;
    for i in 0..q.rows() {
        let mut best = f64::NEG_INFINITY;
        for j in 0..d.rows() {
            best = best.max(sim(q.row(i), d.row(j)));
        }
        total += best;
    }
    total
}
