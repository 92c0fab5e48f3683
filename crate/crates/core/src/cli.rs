//! `lateri` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::bench::{bench_rank, throughput_report, BenchConfig, DEFAULT_CANDIDATES, DEFAULT_WARMUP};
use crate::corpus::{write_synthetic_corpus, CorpusSpec};
use crate::error::Error;
use crate::eval::{evaluate_run_with_threshold, parse_candidates, parse_qrels, parse_run, write_run, RunResults};
use crate::index::{
    build_index, load_index, read_shard, validate_index, validate_shard, BuildOptions, DType, ShardKind,
};
use crate::matrix::{SimilarityMetric, TokenEmbeddingMatrix};
use crate::polyenc::PolyCodes;
use crate::quantize::{estimate_index_size, BinaryMode};
use crate::scorer::{rerank_with, BinaryMaxSimScorer, MaxSimScorer, PolyScorer, ScorerSpec};
use crate::synthembed::{
    contextuality_analysis, tokenize, SynthConfig, DEFAULT_BINS, EXAMPLE_OTHER_WORD, EXAMPLE_SENTENCE_A,
    EXAMPLE_SENTENCE_B, EXAMPLE_SHARED_WORD,
};

pub const THREADS_ENV: &str = "LATERI_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lateri", version, about = "Late-interaction passage re-ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a rerank index from embedding shards.
    BuildIndex(BuildArgs),
    /// Re-rank first-stage candidates and write a TREC run.
    Rerank(RerankArgs),
    /// Score a run against qrels with nDCG@k and MRR@k.
    Evaluate(EvaluateArgs),
    /// Measure query preparation and ranking latency.
    Bench(BenchArgs),
    /// Histogram cross-context differences of synthetic word vectors.
    AnalyzeContext(AnalyzeArgs),
    /// Check an index (or shard) file for format violations.
    ValidateIndex(ValidateArgs),
    /// Estimate index payload size for a storage type.
    EstimateSize(EstimateArgs),
    /// Write a synthetic corpus: shards, candidates and qrels.
    SynthCorpus(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScorerFamily {
    Maxsim,
    MaxsimBinary,
    Poly,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    L2,
    Dot,
    Cosine,
}

impl From<MetricArg> for SimilarityMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::L2 => SimilarityMetric::NegL2Squared,
            MetricArg::Dot => SimilarityMetric::Dot,
            MetricArg::Cosine => SimilarityMetric::Cosine,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Asymmetric,
    Symmetric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DTypeArg {
    F32,
    F16,
    Bit,
}

impl From<DTypeArg> for DType {
    fn from(d: DTypeArg) -> Self {
        match d {
            DTypeArg::F32 => DType::F32,
            DTypeArg::F16 => DType::F16,
            DTypeArg::Bit => DType::Bit,
        }
    }
}

#[derive(Debug, Args)]
struct ScorerArgs {
    #[arg(long, value_enum, default_value = "maxsim")]
    scorer: ScorerFamily,
    #[arg(long, value_enum, default_value = "l2")]
    metric: MetricArg,
    /// Binary scoring mode.
    #[arg(long, value_enum, default_value = "asymmetric")]
    mode: ModeArg,
    /// Shard holding the `polycodes` record (poly scorer).
    #[arg(long)]
    codes: Option<PathBuf>,
    /// Normalize candidate vectors before poly scoring.
    #[arg(long)]
    normalize_candidates: bool,
}

impl ScorerArgs {
    fn build(&self) -> Result<ScorerSpec, CliError> {
        Ok(match self.scorer {
            ScorerFamily::Maxsim => ScorerSpec::MaxSim(MaxSimScorer {
                metric: self.metric.into(),
            }),
            ScorerFamily::MaxsimBinary => ScorerSpec::Binary(BinaryMaxSimScorer {
                mode: match self.mode {
                    ModeArg::Asymmetric => BinaryMode::Asymmetric,
                    ModeArg::Symmetric => BinaryMode::Symmetric,
                },
            }),
            ScorerFamily::Poly => {
                let path = self
                    .codes
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("--scorer poly requires --codes".into()))?;
                ScorerSpec::Poly(PolyScorer {
                    codes: PolyCodes::load(path)?,
                    normalize_candidate: self.normalize_candidates,
                })
            }
        })
    }
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Input shard; repeat for several.
    #[arg(long = "shard", required = true)]
    shards: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DTypeArg,
    /// Store sign bits instead of values.
    #[arg(long)]
    quantize: bool,
}

#[derive(Debug, Args)]
struct RerankArgs {
    #[arg(long)]
    index: PathBuf,
    /// Query shard, 32 rows per record.
    #[arg(long)]
    queries: PathBuf,
    /// First-stage candidates in run format.
    #[arg(long)]
    candidates: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "lateri")]
    tag: String,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Minimum grade counted as relevant for MRR.
    #[arg(long, default_value_t = 1)]
    positive_threshold: u32,
    /// Also print one line per query.
    #[arg(long)]
    per_query: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    candidate_count: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Benchmark at most this many queries from the shard.
    #[arg(long)]
    max_queries: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long, default_value = EXAMPLE_SENTENCE_A)]
    sentence_a: String,
    #[arg(long, default_value = EXAMPLE_SENTENCE_B)]
    sentence_b: String,
    #[arg(long, default_value = EXAMPLE_SHARED_WORD)]
    shared_word: String,
    #[arg(long, default_value = EXAMPLE_OTHER_WORD)]
    other_word: String,
    #[arg(long, default_value_t = 0.3)]
    context_mix: f64,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Write the histogram table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, required_unless_present = "shard", conflicts_with = "shard")]
    index: Option<PathBuf>,
    #[arg(long)]
    shard: Option<PathBuf>,
    /// Row-count rules for --shard.
    #[arg(long, value_enum, default_value = "any")]
    kind: KindArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Passage,
    Query,
    Any,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    passages: u64,
    #[arg(long)]
    avg_tokens: f64,
    /// Elements, or bits for --dtype bit.
    #[arg(long)]
    dim: usize,
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DTypeArg,
    /// Dimension of the f32 baseline for the ratio; defaults to --dim.
    #[arg(long)]
    reference_dim: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    passages: usize,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    #[arg(long, default_value_t = 100)]
    candidates: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.2)]
    context_mix: f64,
    #[arg(long, default_value_t = 8)]
    poly_codes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(CliError::Usage("thread count must be positive".into()));
    }
    Ok(n)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} workers: {e}")))
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::BuildIndex(a) => {
            let report = build_index(
                &a.shards,
                &a.out,
                BuildOptions {
                    dtype: a.dtype.into(),
                    quantize: a.quantize,
                },
            )?;
            writeln!(
                out,
                "records={} dtype={} dim={} tokens={} payload_bytes={} file_bytes={} duplicates={}",
                report.record_count,
                report.dtype,
                report.dim,
                report.token_count,
                report.payload_bytes,
                report.file_bytes,
                report.duplicate_ids
            )?;
        }
        Command::Rerank(a) => rerank_cmd(a, out)?,
        Command::Evaluate(a) => {
            let run = parse_run(&a.run)?;
            let qrels = parse_qrels(&a.qrels)?;
            let report = evaluate_run_with_threshold(&run, &qrels, a.k as usize, a.positive_threshold);
            if a.per_query {
                for (qid, m) in &report.per_query {
                    writeln!(out, "{qid}\tndcg@{}\t{:.6}\tmrr@{}\t{:.6}", a.k, m.ndcg, a.k, m.mrr)?;
                }
            }
            write!(out, "{report}")?;
            if report.warning_count() > 0 {
                writeln!(err, "warning: {} queries skipped", report.warning_count())?;
            }
        }
        Command::Bench(a) => {
            let scorer = a.scorer.build()?;
            let threads = resolve_threads(a.threads)?;
            let index = load_index(&a.index)?;
            let shard = read_shard(&a.queries)?;
            let limit = a.max_queries.unwrap_or(usize::MAX);
            let queries: Vec<TokenEmbeddingMatrix> = shard.records.into_iter().take(limit).map(|r| r.matrix).collect();
            let cfg = BenchConfig {
                candidate_count: a.candidate_count,
                repeats: a.repeats,
                warmup: a.warmup,
                seed: a.seed,
                threads,
            };
            let report = bench_rank(&index, &queries, &scorer, &cfg)?;
            write!(out, "{}", report.to_records())?;
            write!(out, "{report}")?;
            writeln!(out, "throughput: {}", throughput_report(&report)?)?;
        }
        Command::AnalyzeContext(a) => {
            let cfg = SynthConfig::new(a.dim, a.seed, a.context_mix)?;
            let report = contextuality_analysis(
                &tokenize(&a.sentence_a),
                &tokenize(&a.sentence_b),
                &a.shared_word.to_lowercase(),
                &a.other_word.to_lowercase(),
                &cfg,
                a.bins,
            )?;
            match a.out {
                Some(path) => {
                    std::fs::write(&path, report.to_dsv())?;
                    for h in &report.histograms {
                        writeln!(out, "{}\t{:.6}", h.label, h.l2_norm)?;
                    }
                }
                None => write!(out, "{}", report.to_dsv())?,
            }
        }
        Command::ValidateIndex(a) => {
            let report = match (&a.index, &a.shard) {
                (Some(path), _) => validate_index(path)?,
                (None, Some(path)) => validate_shard(
                    path,
                    match a.kind {
                        KindArg::Passage => ShardKind::Passage,
                        KindArg::Query => ShardKind::Query,
                        KindArg::Any => ShardKind::Any,
                    },
                )?,
                (None, None) => return Err(CliError::Usage("--index or --shard is required".into())),
            };
            writeln!(
                out,
                "records={} violations={}",
                report.record_count,
                report.violations.len()
            )?;
            for v in &report.violations {
                writeln!(out, "{v}")?;
            }
            if !report.is_clean() {
                return Err(CliError::Data(Error::Corrupt(format!(
                    "{} violations found",
                    report.violations.len()
                ))));
            }
        }
        Command::EstimateSize(a) => {
            let dtype: DType = a.dtype.into();
            let est = estimate_index_size(a.passages, a.avg_tokens, a.dim, dtype)?;
            let reference = a.reference_dim.unwrap_or(a.dim);
            writeln!(
                out,
                "passages={} tokens={} dim={} dtype={} bytes_per_vector={} payload_bytes={} ratio_vs_f32_dim{}={:.4}",
                est.passage_count,
                est.token_count,
                est.dim,
                est.dtype,
                est.bytes_per_vector,
                est.payload_bytes,
                reference,
                est.ratio_vs_f32(reference)
            )?;
        }
        Command::SynthCorpus(a) => {
            let spec = CorpusSpec {
                passages: a.passages,
                queries: a.queries,
                candidates_per_query: a.candidates,
                dim: a.dim,
                context_mix: a.context_mix,
                poly_codes: a.poly_codes,
                seed: a.seed,
                ..CorpusSpec::default()
            };
            let files = write_synthetic_corpus(&a.out, &spec)?;
            for (name, path) in [
                ("passages", &files.passages_shard),
                ("queries", &files.queries_shard),
                ("poly_passages", &files.poly_passages_shard),
                ("poly_codes", &files.poly_codes_shard),
                ("candidates", &files.candidates),
                ("qrels", &files.qrels),
            ] {
                writeln!(out, "{name}={}", path.display())?;
            }
        }
    }
    Ok(())
}

fn rerank_cmd(a: RerankArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let scorer = a.scorer.build()?;
    if a.tag.is_empty() || a.tag.contains(char::is_whitespace) {
        return Err(CliError::Usage(format!("--tag {:?} must be a single word", a.tag)));
    }
    let threads = resolve_threads(a.threads)?;
    let index = load_index(&a.index)?;
    let candidates = parse_candidates(&a.candidates)?;
    let shard = read_shard(&a.queries)?;
    let queries: HashMap<&str, &TokenEmbeddingMatrix> =
        shard.records.iter().map(|r| (r.id.as_str(), &r.matrix)).collect();

    let jobs: Vec<(&String, &Vec<String>, &TokenEmbeddingMatrix)> = candidates
        .queries
        .iter()
        .map(|(qid, cands)| {
            queries
                .get(qid.as_str())
                .map(|q| (qid, cands, *q))
                .ok_or_else(|| Error::UnknownPassage(format!("query {qid}")))
        })
        .collect::<Result<_, _>>()?;
    let ranked: Vec<crate::error::Result<_>> = pool(threads)?.install(|| {
        jobs.par_iter()
            .map(|(qid, cands, q)| Ok(((*qid).clone(), rerank_with(&scorer, q, cands, &index)?)))
            .collect()
    });
    let results: RunResults = ranked.into_iter().collect::<crate::error::Result<_>>()?;
    write_run(&a.out, &results, &a.tag)?;
    writeln!(out, "queries={} run={}", results.len(), a.out.display())?;
    Ok(())
}
