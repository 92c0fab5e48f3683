//! C ABI over the lateri re-ranking engine.
//!
//! Every fallible call returns a [`LateriStatus`]. On failure a message for
//! the calling thread is available from [`lateri_last_error`]. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use lateri::scorer::{BinaryMaxSimScorer, MaxSimScorer, PolyScorer};
use lateri::{
    estimate_index_size, packed_dot, rerank_with, BinaryMode, DType, Error, PolyCodes, RerankIndex, ScoredCandidate,
    SimilarityMetric, TokenEmbeddingMatrix,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateriStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Dimension, row count or other shape mismatch.
    Shape = 3,
    NotNormalized = 4,
    UnknownPassage = 5,
    DuplicatePassage = 6,
    /// Malformed, truncated or unsupported index data.
    Format = 7,
    Io = 8,
    Panic = 9,
}

/// Similarity metric codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateriMetric {
    NegL2Squared = 0,
    Dot = 1,
    Cosine = 2,
}

/// Scorer codes for [`lateri_rerank`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateriScorer {
    MaxSim = 0,
    BinaryAsymmetric = 1,
    BinarySymmetric = 2,
}

/// Storage type codes, equal to the on-disk dtype byte.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateriDType {
    F32 = 0,
    F16 = 1,
    Bit = 2,
}

/// Opaque handle to an open index.
pub struct LateriIndex {
    inner: RerankIndex,
}

/// Opaque handle to poly-encoder codes.
pub struct LateriCodes {
    inner: PolyCodes,
}

/// Opaque handle to a ranked candidate list.
pub struct LateriResults {
    items: Vec<(CString, ScoredCandidate)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LateriStatus {
    match e {
        Error::DimensionMismatch { .. }
        | Error::QueryRows { .. }
        | Error::Shape(_)
        | Error::EmptyPassage
        | Error::NotByteAligned(_)
        | Error::Incompatible(_) => LateriStatus::Shape,
        Error::NotNormalized => LateriStatus::NotNormalized,
        Error::UnknownPassage(_) | Error::WordNotFound(_) => LateriStatus::UnknownPassage,
        Error::DuplicatePassage(_) => LateriStatus::DuplicatePassage,
        Error::BadMagic
        | Error::UnsupportedVersion(_)
        | Error::Truncated(_)
        | Error::Corrupt(_)
        | Error::Parse { .. }
        | Error::ConflictingGrade { .. } => LateriStatus::Format,
        Error::Io(_) => LateriStatus::Io,
        _ => LateriStatus::InvalidArgument,
    }
}

struct Fail(LateriStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(LateriStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Fail {
    Fail(LateriStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LateriStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LateriStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LateriStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn matrix(data: *const f32, rows: usize, dim: usize, what: &str) -> Result<TokenEmbeddingMatrix, Fail> {
    if data.is_null() {
        return Err(null(what));
    }
    let len = rows
        .checked_mul(dim)
        .ok_or_else(|| invalid(format!("{what} shape overflows")))?;
    let values = slice::from_raw_parts(data, len).to_vec();
    Ok(TokenEmbeddingMatrix::new(rows, dim, values)?)
}

fn metric(code: u32) -> Result<SimilarityMetric, Fail> {
    match code {
        0 => Ok(SimilarityMetric::NegL2Squared),
        1 => Ok(SimilarityMetric::Dot),
        2 => Ok(SimilarityMetric::Cosine),
        _ => Err(invalid(format!("unknown metric code {code}"))),
    }
}

/// Message for the last failed call on this thread, or NULL if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lateri_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Opens an index file. On success `*out` owns a handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lateri_index_open(path: *const c_char, out: *mut *mut LateriIndex) -> LateriStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let inner = RerankIndex::open(Path::new(path))?;
        *out = Box::into_raw(Box::new(LateriIndex { inner }));
        Ok(())
    })
}

/// # Safety
/// `index` must be NULL or a handle from [`lateri_index_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lateri_index_free(index: *mut LateriIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of passages, 0 for NULL.
///
/// # Safety
/// `index` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lateri_index_len(index: *const LateriIndex) -> u64 {
    index.as_ref().map_or(0, |i| i.inner.len() as u64)
}

/// Vector dimension (bits for a bit index), 0 for NULL.
///
/// # Safety
/// `index` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lateri_index_dim(index: *const LateriIndex) -> u32 {
    index.as_ref().map_or(0, |i| i.inner.dim() as u32)
}

/// # Safety
/// `index` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lateri_index_dtype(index: *const LateriIndex, out: *mut LateriDType) -> LateriStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| null("index"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match index.inner.dtype() {
            DType::F32 => LateriDType::F32,
            DType::F16 => LateriDType::F16,
            DType::Bit => LateriDType::Bit,
        };
        Ok(())
    })
}

/// Loads poly-encoder codes from a shard holding a `polycodes` record.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lateri_codes_load(path: *const c_char, out: *mut *mut LateriCodes) -> LateriStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let inner = PolyCodes::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(LateriCodes { inner }));
        Ok(())
    })
}

/// # Safety
/// `codes` must be NULL or a handle from [`lateri_codes_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lateri_codes_free(codes: *mut LateriCodes) {
    if !codes.is_null() {
        drop(Box::from_raw(codes));
    }
}

/// MaxSim score of a 32-row query against one passage, both row-major.
///
/// # Safety
/// `query` must hold `query_rows * dim` floats, `passage` must hold
/// `passage_rows * dim` floats and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lateri_maxsim(
    query: *const f32,
    query_rows: usize,
    passage: *const f32,
    passage_rows: usize,
    dim: usize,
    metric_code: u32,
    out: *mut f64,
) -> LateriStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let metric = metric(metric_code)?;
        let mut q = matrix(query, query_rows, dim, "query")?;
        let mut d = matrix(passage, passage_rows, dim, "passage")?;
        if metric == SimilarityMetric::Cosine {
            q = q.with_norm_state(lateri::NormState::L2Normalized)?;
            d = d.with_norm_state(lateri::NormState::L2Normalized)?;
        }
        *out = lateri::maxsim_score(&q, &d, metric)?;
        Ok(())
    })
}

/// `dim_bits - 2 * popcount(a ^ b)` over `words` packed 64-bit words.
///
/// # Safety
/// `a` and `b` must each hold `words` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lateri_packed_dot(
    a: *const u64,
    b: *const u64,
    words: usize,
    dim_bits: usize,
    out: *mut i64,
) -> LateriStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if a.is_null() || b.is_null() {
            return Err(null("vector"));
        }
        let (a, b) = (slice::from_raw_parts(a, words), slice::from_raw_parts(b, words));
        *out = packed_dot(a, b, dim_bits)?;
        Ok(())
    })
}

/// Payload bytes of an index of `passages` records averaging `avg_tokens`
/// rows. `dim` counts bits for [`LateriDType::Bit`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lateri_estimate_index_size(
    passages: u64,
    avg_tokens: f64,
    dim: usize,
    dtype_code: u32,
    out: *mut u64,
) -> LateriStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let dtype = u8::try_from(dtype_code)
            .ok()
            .and_then(DType::from_code)
            .ok_or_else(|| invalid(format!("unknown dtype code {dtype_code}")))?;
        *out = estimate_index_size(passages, avg_tokens, dim, dtype)?.payload_bytes;
        Ok(())
    })
}

unsafe fn candidate_ids<'a>(ids: *const *const c_char, count: usize) -> Result<Vec<&'a str>, Fail> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if ids.is_null() {
        return Err(null("candidate_ids"));
    }
    slice::from_raw_parts(ids, count)
        .iter()
        .map(|&p| c_str(p, "candidate id"))
        .collect()
}

fn into_results(ranked: Vec<ScoredCandidate>) -> Result<*mut LateriResults, Fail> {
    let items = ranked
        .into_iter()
        .map(|c| {
            CString::new(c.passage_id.clone())
                .map(|id| (id, c))
                .map_err(|_| invalid("passage id holds NUL"))
        })
        .collect::<Result<_, _>>()?;
    Ok(Box::into_raw(Box::new(LateriResults { items })))
}

/// Re-ranks `candidate_count` passage ids against a 32-row query with a
/// MaxSim scorer. `metric_code` applies to [`LateriScorer::MaxSim`] only.
///
/// # Safety
/// `index` must be a live handle, `query` must hold `query_rows * dim`
/// floats, `candidate_ids` must hold `candidate_count` NUL-terminated strings
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lateri_rerank(
    index: *const LateriIndex,
    query: *const f32,
    query_rows: usize,
    dim: usize,
    candidate_ids: *const *const c_char,
    candidate_count: usize,
    scorer: u32,
    metric_code: u32,
    out: *mut *mut LateriResults,
) -> LateriStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let index = &index.as_ref().ok_or_else(|| null("index"))?.inner;
        let q = matrix(query, query_rows, dim, "query")?;
        let ids = self::candidate_ids(candidate_ids, candidate_count)?;
        let ranked = match scorer {
            0 => rerank_with(
                &MaxSimScorer {
                    metric: metric(metric_code)?,
                },
                &q,
                &ids,
                index,
            )?,
            1 | 2 => {
                let mode = if scorer == 1 {
                    BinaryMode::Asymmetric
                } else {
                    BinaryMode::Symmetric
                };
                rerank_with(&BinaryMaxSimScorer { mode }, &q, &ids, index)?
            }
            _ => return Err(invalid(format!("unknown scorer code {scorer}"))),
        };
        *out = into_results(ranked)?;
        Ok(())
    })
}

/// Re-ranks candidates with the poly-encoder score. The index must hold one
/// row per passage.
///
/// # Safety
/// As for [`lateri_rerank`]; `codes` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lateri_rerank_poly(
    index: *const LateriIndex,
    codes: *const LateriCodes,
    query: *const f32,
    query_rows: usize,
    dim: usize,
    candidate_ids: *const *const c_char,
    candidate_count: usize,
    out: *mut *mut LateriResults,
) -> LateriStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let index = &index.as_ref().ok_or_else(|| null("index"))?.inner;
        let codes = &codes.as_ref().ok_or_else(|| null("codes"))?.inner;
        let q = matrix(query, query_rows, dim, "query")?;
        let ids = self::candidate_ids(candidate_ids, candidate_count)?;
        let scorer = PolyScorer {
            codes: codes.clone(),
            normalize_candidate: false,
        };
        *out = into_results(rerank_with(&scorer, &q, &ids, index)?)?;
        Ok(())
    })
}

/// Number of ranked entries, 0 for NULL.
///
/// # Safety
/// `results` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lateri_results_len(results: *const LateriResults) -> usize {
    results.as_ref().map_or(0, |r| r.items.len())
}

/// Reads entry `i` (0-based, best first). `*passage_id` borrows from the
/// handle and stays valid until [`lateri_results_free`]. Any output pointer
/// may be NULL.
///
/// # Safety
/// `results` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lateri_results_get(
    results: *const LateriResults,
    i: usize,
    passage_id: *mut *const c_char,
    score: *mut f64,
    rank: *mut u32,
) -> LateriStatus {
    guard(|| {
        let results = results.as_ref().ok_or_else(|| null("results"))?;
        let (id, c) = results
            .items
            .get(i)
            .ok_or_else(|| invalid(format!("entry {i} out of range ({})", results.items.len())))?;
        if let Some(p) = passage_id.as_mut() {
            *p = id.as_ptr();
        }
        if let Some(s) = score.as_mut() {
            *s = c.score;
        }
        if let Some(r) = rank.as_mut() {
            *r = c.rank as u32;
        }
        Ok(())
    })
}

/// # Safety
/// `results` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lateri_results_free(results: *mut LateriResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}
