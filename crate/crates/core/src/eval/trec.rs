//! TREC text formats: qrels (`qid iter pid grade`) and run files
//! (`qid Q0 pid rank score tag`), whitespace separated, one row per line.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::maxsim::ScoredCandidate;

/// Ranked results per query id.
pub type RunResults = BTreeMap<String, Vec<ScoredCandidate>>;

/// Relevance judgments: query id → passage id → grade.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    pub judgments: BTreeMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn get(&self, qid: &str) -> Option<&HashMap<String, u32>> {
        self.judgments.get(qid)
    }

    pub fn grade(&self, qid: &str, pid: &str) -> Option<u32> {
        self.judgments.get(qid)?.get(pid).copied()
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub qid: String,
    pub pid: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    pub rows: Vec<RunRow>,
}

impl RunFile {
    pub fn from_results(results: &RunResults, tag: &str) -> Self {
        let mut qids: Vec<&String> = results.keys().collect();
        qids.sort_by(|a, b| qid_order(a, b));
        let rows = qids
            .into_iter()
            .flat_map(|qid| {
                results[qid].iter().map(move |c| RunRow {
                    qid: qid.clone(),
                    pid: c.passage_id.clone(),
                    rank: c.rank,
                    score: c.score,
                    tag: tag.to_string(),
                })
            })
            .collect();
        Self { rows }
    }

    /// Passage ids per query in rank order; equal ranks fall back to score
    /// descending, then passage id.
    pub fn rankings(&self) -> BTreeMap<String, Vec<String>> {
        let mut grouped: BTreeMap<String, Vec<&RunRow>> = BTreeMap::new();
        for row in &self.rows {
            grouped.entry(row.qid.clone()).or_default().push(row);
        }
        grouped
            .into_iter()
            .map(|(qid, mut rows)| {
                rows.sort_by(|a, b| {
                    a.rank
                        .cmp(&b.rank)
                        .then_with(|| b.score.total_cmp(&a.score))
                        .then_with(|| a.pid.cmp(&b.pid))
                });
                (qid, rows.into_iter().map(|r| r.pid.clone()).collect())
            })
            .collect()
    }
}

/// Candidate passages per query, in first-stage rank order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateSet {
    pub queries: BTreeMap<String, Vec<String>>,
}

/// Orders query ids numerically when both are integers, bytewise otherwise.
pub fn qid_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn parse_qrels(path: &Path) -> Result<Qrels> {
    parse_qrels_str(&fs::read_to_string(path)?, path)
}

/// `source` only labels error messages.
pub fn parse_qrels_str(text: &str, source: &Path) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [qid, _iter, pid, grade] = fields[..] else {
            return Err(parse_err(
                source,
                lineno,
                format!("expected 4 fields \"qid iter pid grade\", got {}", fields.len()),
            ));
        };
        let grade: u32 = grade
            .parse()
            .map_err(|_| parse_err(source, lineno, format!("grade {grade:?} is not a non-negative integer")))?;
        let per_query = qrels.judgments.entry(qid.to_string()).or_default();
        if let Some(&first) = per_query.get(pid) {
            if first != grade {
                return Err(Error::ConflictingGrade {
                    qid: qid.to_string(),
                    pid: pid.to_string(),
                    first,
                    second: grade,
                });
            }
        }
        per_query.insert(pid.to_string(), grade);
    }
    Ok(qrels)
}

pub fn parse_run(path: &Path) -> Result<RunFile> {
    parse_run_str(&fs::read_to_string(path)?, path)
}

pub fn parse_run_str(text: &str, source: &Path) -> Result<RunFile> {
    let mut rows = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [qid, _q0, pid, rank, score, tag] = fields[..] else {
            return Err(parse_err(
                source,
                lineno,
                format!("expected 6 fields \"qid Q0 pid rank score tag\", got {}", fields.len()),
            ));
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| parse_err(source, lineno, format!("rank {rank:?} is not an integer")))?;
        let score: f64 = score
            .parse()
            .map_err(|_| parse_err(source, lineno, format!("score {score:?} is not a number")))?;
        if !seen.insert((qid.to_string(), pid.to_string())) {
            return Err(parse_err(
                source,
                lineno,
                format!("duplicate passage {pid:?} for query {qid:?}"),
            ));
        }
        rows.push(RunRow {
            qid: qid.to_string(),
            pid: pid.to_string(),
            rank,
            score,
            tag: tag.to_string(),
        });
    }
    Ok(RunFile { rows })
}

/// Reads a first-stage candidate list in run format.
pub fn parse_candidates(path: &Path) -> Result<CandidateSet> {
    let run = parse_run(path)?;
    Ok(CandidateSet {
        queries: run.rankings(),
    })
}

/// Formats results as run-file text: queries in ascending id order, scores
/// with six decimals.
pub fn format_run(results: &RunResults, tag: &str) -> String {
    let mut out = String::new();
    for row in RunFile::from_results(results, tag).rows {
        writeln!(
            out,
            "{} Q0 {} {} {:.6} {}",
            row.qid, row.pid, row.rank, row.score, row.tag
        )
        .unwrap();
    }
    out
}

pub fn write_run(path: &Path, results: &RunResults, tag: &str) -> Result<PathBuf> {
    if tag.is_empty() || tag.contains(char::is_whitespace) {
        return Err(Error::invalid(format!(
            "run tag {tag:?} must be a single non-empty word"
        )));
    }
    fs::write(path, format_run(results, tag))?;
    Ok(path.to_path_buf())
}
