//! Deterministic synthetic token embedder and the cross-context difference
//! analysis.
//!
//! Each token gets a unit base vector drawn from a SplitMix64 stream seeded by
//! `FNV-1a-64(seed as 8 LE bytes ++ token UTF-8 bytes)`; coordinates are
//! uniform in `[-1, 1)` before normalization. Context enters by mixing in the
//! mean base vector of the immediate neighbours:
//!
//! ```text
//! row_i = normalize((1 - mix) * base_i + mix * mean(base_{i-1}, base_{i+1}))
//! ```
//!
//! A token without neighbours uses its own base as the neighbour mean. Only
//! the hashing and stream definitions matter for reproducing fixtures in
//! another language.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::matrix::{NormState, TokenEmbeddingMatrix, MAX_PASSAGE_ROWS, QUERY_ROWS};

/// Padding token for short queries.
pub const MASK_TOKEN: &str = "[MASK]";

pub const DEFAULT_BINS: usize = 40;

/// Default sentence pair for the contextuality analysis.
pub const EXAMPLE_SENTENCE_A: &str =
    "Discoveries in organometallic chemistry have led to important insights into chemical bonding.";
pub const EXAMPLE_SENTENCE_B: &str = "The 18-electron rule is the equivalent of the octet rule in main group chemistry";
pub const EXAMPLE_SHARED_WORD: &str = "chemistry";
pub const EXAMPLE_OTHER_WORD: &str = "have";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub dim: usize,
    pub seed: u64,
    /// Weight of the neighbour mean, in `[0, 1]`.
    pub context_mix: f64,
}

impl SynthConfig {
    pub fn new(dim: usize, seed: u64, context_mix: f64) -> Result<Self> {
        let cfg = Self { dim, seed, context_mix };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("embedding dim must be positive"));
        }
        if !(0.0..=1.0).contains(&self.context_mix) {
            return Err(Error::invalid(format!(
                "context_mix must lie in [0, 1], got {}",
                self.context_mix
            )));
        }
        Ok(())
    }
}

pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Unit-norm pseudo-random vector for a token.
pub fn base_vector(token: &str, cfg: &SynthConfig) -> Vec<f64> {
    let mut state = fnv1a64(cfg.seed.to_le_bytes().into_iter().chain(token.bytes()));
    let mut v: Vec<f64> = (0..cfg.dim)
        .map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
        .collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// Lowercases and splits on anything that is not alphanumeric or `-`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Embeds a token sequence. Queries are truncated or padded with
/// [`MASK_TOKEN`] to exactly 32 rows; passages are truncated to 192.
pub fn synth_embed<S: AsRef<str>>(tokens: &[S], cfg: &SynthConfig, is_query: bool) -> Result<TokenEmbeddingMatrix> {
    cfg.check()?;
    if tokens.is_empty() {
        return Err(Error::invalid("cannot embed an empty token list"));
    }
    let mut seq: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    if is_query {
        seq.resize(QUERY_ROWS, MASK_TOKEN);
    } else {
        seq.truncate(MAX_PASSAGE_ROWS);
    }
    let bases: Vec<Vec<f64>> = seq.iter().map(|t| base_vector(t, cfg)).collect();
    let mix = cfg.context_mix;
    let mut data = Vec::with_capacity(seq.len() * cfg.dim);
    let mut row = vec![0.0f64; cfg.dim];
    for i in 0..bases.len() {
        let neighbours: Vec<&Vec<f64>> = [i.checked_sub(1), Some(i + 1)]
            .into_iter()
            .flatten()
            .filter_map(|j| bases.get(j))
            .collect();
        for (d, r) in row.iter_mut().enumerate() {
            let mean = if neighbours.is_empty() {
                bases[i][d]
            } else {
                neighbours.iter().map(|b| b[d]).sum::<f64>() / neighbours.len() as f64
            };
            *r = (1.0 - mix) * bases[i][d] + mix * mean;
        }
        if !normalize(&mut row) {
            row.copy_from_slice(&bases[i]);
        }
        data.extend(row.iter().map(|&x| x as f32));
    }
    TokenEmbeddingMatrix::new(seq.len(), cfg.dim, data)?.with_norm_state(NormState::L2Normalized)
}

/// Anything that turns a token sequence into one row per token.
pub trait TokenEmbedder {
    fn embed(&self, tokens: &[String]) -> Result<TokenEmbeddingMatrix>;
}

impl TokenEmbedder for SynthConfig {
    fn embed(&self, tokens: &[String]) -> Result<TokenEmbeddingMatrix> {
        synth_embed(tokens, self, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiffLabel {
    SameWordDiffSentence,
    DiffWordSameSentence,
    DiffWordDiffSentence,
}

impl DiffLabel {
    pub const ALL: [DiffLabel; 3] = [
        DiffLabel::SameWordDiffSentence,
        DiffLabel::DiffWordSameSentence,
        DiffLabel::DiffWordDiffSentence,
    ];
}

impl fmt::Display for DiffLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffLabel::SameWordDiffSentence => "same_word_diff_sentence",
            DiffLabel::DiffWordSameSentence => "diff_word_same_sentence",
            DiffLabel::DiffWordDiffSentence => "diff_word_diff_sentence",
        })
    }
}

/// Histogram of the coordinates of one difference vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffHistogram {
    pub label: DiffLabel,
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Euclidean norm of the difference vector.
    pub l2_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualityReport {
    pub histograms: [DiffHistogram; 3],
}

impl ContextualityReport {
    pub fn get(&self, label: DiffLabel) -> &DiffHistogram {
        self.histograms
            .iter()
            .find(|h| h.label == label)
            .expect("every label is present")
    }

    pub fn distance(&self, label: DiffLabel) -> f64 {
        self.get(label).l2_norm
    }

    /// Tab-separated `label lo hi count` rows followed by `# norm` lines.
    pub fn to_dsv(&self) -> String {
        let mut out = String::from("label\tbin_lo\tbin_hi\tcount\n");
        for h in &self.histograms {
            for (i, c) in h.counts.iter().enumerate() {
                writeln!(out, "{}\t{:.6}\t{:.6}\t{c}", h.label, h.edges[i], h.edges[i + 1]).unwrap();
            }
        }
        for h in &self.histograms {
            writeln!(out, "# norm\t{}\t{:.6}", h.label, h.l2_norm).unwrap();
        }
        out
    }
}

fn position(tokens: &[String], word: &str) -> Result<usize> {
    tokens
        .iter()
        .position(|t| t == word)
        .ok_or_else(|| Error::WordNotFound(word.to_string()))
}

/// Compares a word shared by two sentences against itself across the
/// sentences and against a different word of the first sentence, within and
/// across sentences. Differences are `vec1 - vec2` coordinatewise.
pub fn contextuality_analysis<E: TokenEmbedder>(
    sentence_a: &[String],
    sentence_b: &[String],
    shared_word: &str,
    other_word: &str,
    embedder: &E,
    bins: usize,
) -> Result<ContextualityReport> {
    if shared_word == other_word {
        return Err(Error::invalid("the compared words must differ"));
    }
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let shared_a = position(sentence_a, shared_word)?;
    let other_a = position(sentence_a, other_word)?;
    let shared_b = position(sentence_b, shared_word)?;
    let ea = embedder.embed(sentence_a)?;
    let eb = embedder.embed(sentence_b)?;
    if ea.dim() != eb.dim() {
        return Err(Error::DimensionMismatch {
            expected: ea.dim(),
            actual: eb.dim(),
        });
    }
    let diff =
        |u: &[f32], v: &[f32]| -> Vec<f64> { u.iter().zip(v).map(|(a, b)| f64::from(*a) - f64::from(*b)).collect() };
    let diffs = [
        diff(ea.row(shared_a), eb.row(shared_b)),
        diff(ea.row(shared_a), ea.row(other_a)),
        diff(ea.row(other_a), eb.row(shared_b)),
    ];
    let (mut lo, mut hi) = diffs
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let histograms = [0, 1, 2].map(|k| {
        let mut counts = vec![0u64; bins];
        for &x in &diffs[k] {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        DiffHistogram {
            label: DiffLabel::ALL[k],
            edges: edges.clone(),
            counts,
            l2_norm: diffs[k].iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    });
    Ok(ContextualityReport { histograms })
}
