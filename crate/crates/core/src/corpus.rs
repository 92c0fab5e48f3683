//! Synthetic retrieval corpus for desk-scale end-to-end runs.
//!
//! Passages are random word sequences. Each query samples words from one
//! target passage (graded 3) and a couple of them are planted in a second
//! passage (graded 1). Every query gets a fixed-size candidate list holding
//! both judged passages plus random fillers, in shuffled order. Everything is
//! a pure function of [`CorpusSpec`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{write_shard, DType, EmbeddingShard};
use crate::matrix::TokenEmbeddingMatrix;
use crate::polyenc::{PolyCodes, CODES_RECORD_ID};
use crate::synthembed::{synth_embed, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub passages: usize,
    pub queries: usize,
    pub candidates_per_query: usize,
    pub vocabulary: usize,
    pub dim: usize,
    pub context_mix: f64,
    pub poly_codes: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            passages: 1000,
            queries: 50,
            candidates_per_query: 100,
            vocabulary: 2000,
            dim: 64,
            context_mix: 0.2,
            poly_codes: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub passages: BTreeMap<String, Vec<String>>,
    pub queries: BTreeMap<String, Vec<String>>,
    /// Query id → candidate passage ids in first-stage order.
    pub candidates: BTreeMap<String, Vec<String>>,
    /// `(query id, passage id, grade)`.
    pub qrels: Vec<(String, String, u32)>,
}

fn passage_id(i: usize) -> String {
    format!("p{i:06}")
}

impl SyntheticCorpus {
    pub fn generate(spec: &CorpusSpec) -> Result<Self> {
        if spec.queries == 0 || spec.vocabulary == 0 {
            return Err(Error::invalid("corpus needs queries and a vocabulary"));
        }
        if spec.passages < 2 * spec.queries || spec.candidates_per_query < 2 {
            return Err(Error::invalid(
                "corpus needs at least two passages per query and two candidates per query",
            ));
        }
        if spec.candidates_per_query > spec.passages {
            return Err(Error::invalid("more candidates per query than passages"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let word = |rng: &mut ChaCha8Rng| format!("w{}", rng.gen_range(0..spec.vocabulary));

        let mut passages: Vec<Vec<String>> = (0..spec.passages)
            .map(|_| {
                let len = rng.gen_range(16..=48);
                (0..len).map(|_| word(&mut rng)).collect()
            })
            .collect();

        let mut order: Vec<usize> = (0..spec.passages).collect();
        order.shuffle(&mut rng);
        let mut queries = BTreeMap::new();
        let mut candidates = BTreeMap::new();
        let mut qrels = Vec::new();
        for q in 0..spec.queries {
            let qid = (q + 1).to_string();
            let (target, partial) = (order[2 * q], order[2 * q + 1]);
            let n = rng.gen_range(4..=8);
            let mut tokens: Vec<String> = passages[target].choose_multiple(&mut rng, n).cloned().collect();
            tokens.push(word(&mut rng));
            for t in tokens.iter().take(2) {
                let at = rng.gen_range(0..=passages[partial].len());
                passages[partial].insert(at, t.clone());
            }

            let mut cands = vec![target, partial];
            while cands.len() < spec.candidates_per_query {
                let c = rng.gen_range(0..spec.passages);
                if !cands.contains(&c) {
                    cands.push(c);
                }
            }
            cands.shuffle(&mut rng);
            qrels.push((qid.clone(), passage_id(target), 3));
            qrels.push((qid.clone(), passage_id(partial), 1));
            let negative = cands.iter().copied().find(|c| *c != target && *c != partial);
            if let Some(neg) = negative {
                qrels.push((qid.clone(), passage_id(neg), 0));
            }
            candidates.insert(qid.clone(), cands.into_iter().map(passage_id).collect());
            queries.insert(qid, tokens);
        }
        let passages = passages
            .into_iter()
            .enumerate()
            .map(|(i, p)| (passage_id(i), p))
            .collect();
        Ok(Self {
            passages,
            queries,
            candidates,
            qrels,
        })
    }
}

/// Paths written by [`write_synthetic_corpus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusFiles {
    pub passages_shard: PathBuf,
    pub queries_shard: PathBuf,
    pub poly_passages_shard: PathBuf,
    pub poly_codes_shard: PathBuf,
    pub candidates: PathBuf,
    pub qrels: PathBuf,
}

/// Embeds a synthetic corpus and writes shards, a candidate run and qrels
/// into `dir`.
pub fn write_synthetic_corpus(dir: &Path, spec: &CorpusSpec) -> Result<CorpusFiles> {
    let corpus = SyntheticCorpus::generate(spec)?;
    let cfg = SynthConfig::new(spec.dim, spec.seed, spec.context_mix)?;
    fs::create_dir_all(dir)?;
    let files = CorpusFiles {
        passages_shard: dir.join("passages.shard"),
        queries_shard: dir.join("queries.shard"),
        poly_passages_shard: dir.join("poly_passages.shard"),
        poly_codes_shard: dir.join("polycodes.shard"),
        candidates: dir.join("candidates.run"),
        qrels: dir.join("qrels.txt"),
    };

    let mut passages = EmbeddingShard::new(DType::F32, spec.dim)?;
    let mut pooled = EmbeddingShard::new(DType::F32, spec.dim)?;
    for (id, tokens) in &corpus.passages {
        let m = synth_embed(tokens, &cfg, false)?;
        pooled.push(id.clone(), mean_pool(&m)?)?;
        passages.push(id.clone(), m)?;
    }
    write_shard(&files.passages_shard, &passages)?;
    write_shard(&files.poly_passages_shard, &pooled)?;

    let mut queries = EmbeddingShard::new(DType::F32, spec.dim)?;
    for (id, tokens) in &corpus.queries {
        queries.push(id.clone(), synth_embed(tokens, &cfg, true)?)?;
    }
    write_shard(&files.queries_shard, &queries)?;

    let mut codes = EmbeddingShard::new(DType::F32, spec.dim)?;
    codes.push(
        CODES_RECORD_ID,
        PolyCodes::random(spec.poly_codes.max(1), spec.dim, spec.seed)?.as_matrix(),
    )?;
    write_shard(&files.poly_codes_shard, &codes)?;

    let mut run = String::new();
    for (qid, cands) in &corpus.candidates {
        for (i, pid) in cands.iter().enumerate() {
            writeln!(run, "{qid} Q0 {pid} {} {:.6} bm25", i + 1, -(i as f64)).unwrap();
        }
    }
    fs::write(&files.candidates, run)?;

    let mut qrels = String::new();
    for (qid, pid, grade) in &corpus.qrels {
        writeln!(qrels, "{qid} 0 {pid} {grade}").unwrap();
    }
    fs::write(&files.qrels, qrels)?;
    Ok(files)
}

/// Single unit vector per passage: the normalized mean of its rows.
fn mean_pool(m: &TokenEmbeddingMatrix) -> Result<TokenEmbeddingMatrix> {
    let mut mean = vec![0.0f32; m.dim()];
    for r in m.iter_rows() {
        for (a, x) in mean.iter_mut().zip(r) {
            *a += x / m.rows() as f32;
        }
    }
    TokenEmbeddingMatrix::new(1, m.dim(), mean)?.l2_normalize()
}
