use std::collections::BTreeMap;
use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use lateri::index::{encode_index, BuildOptions};
use lateri::{DType, PassageRecord, TokenEmbeddingMatrix};
use lateri_ffi::*;

const DIM: usize = 8;

fn row(seed: usize) -> Vec<f32> {
    (0..DIM)
        .map(|j| (((seed * 7 + j * 3) % 11) as f32 - 5.0) / 5.0)
        .collect()
}

fn query() -> Vec<f32> {
    (0..32).flat_map(row).collect()
}

fn write_index(dir: &Path, quantize: bool) -> CString {
    let mut records = BTreeMap::new();
    for p in 0..6 {
        let data: Vec<f32> = (0..3).flat_map(|r| row(p * 5 + r)).collect();
        let m = TokenEmbeddingMatrix::new(3, DIM, data).unwrap();
        records.insert(format!("d{p}"), PassageRecord::Dense(m));
    }
    let opts = BuildOptions {
        dtype: DType::F32,
        quantize,
    };
    let (bytes, _) = encode_index(records, DIM, opts).unwrap();
    let path = dir.join(if quantize { "bit.lirx" } else { "f32.lirx" });
    std::fs::write(&path, bytes).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = lateri_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn open_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_index(dir.path(), false);
    let mut index = ptr::null_mut();
    unsafe {
        assert_eq!(lateri_index_open(path.as_ptr(), &mut index), LateriStatus::Ok);
        assert_eq!(lateri_index_len(index), 6);
        assert_eq!(lateri_index_dim(index), DIM as u32);
        let mut dtype = LateriDType::Bit;
        assert_eq!(lateri_index_dtype(index, &mut dtype), LateriStatus::Ok);
        assert_eq!(dtype, LateriDType::F32);
        lateri_index_free(index);
        lateri_index_free(ptr::null_mut());
    }
}

#[test]
fn open_reports_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lirx");
    std::fs::write(&bad, b"NOPE and some more bytes to pass the header").unwrap();
    let bad = CString::new(bad.to_str().unwrap()).unwrap();
    let missing = CString::new(dir.path().join("missing").to_str().unwrap()).unwrap();
    let mut index = ptr::null_mut();
    unsafe {
        assert_eq!(lateri_index_open(bad.as_ptr(), &mut index), LateriStatus::Format);
        assert!(index.is_null());
        assert!(last_error().contains("magic"));
        assert_eq!(lateri_index_open(missing.as_ptr(), &mut index), LateriStatus::Io);
        assert_eq!(lateri_index_open(ptr::null(), &mut index), LateriStatus::NullPointer);
        assert_eq!(
            lateri_index_open(bad.as_ptr(), ptr::null_mut()),
            LateriStatus::NullPointer
        );
    }
}

fn ranked(results: *const LateriResults) -> Vec<(String, f64, u32)> {
    let n = unsafe { lateri_results_len(results) };
    (0..n)
        .map(|i| {
            let (mut id, mut score, mut rank) = (ptr::null(), 0.0, 0);
            let st = unsafe { lateri_results_get(results, i, &mut id, &mut score, &mut rank) };
            assert_eq!(st, LateriStatus::Ok);
            let id = unsafe { CStr::from_ptr(id) }.to_str().unwrap().to_owned();
            (id, score, rank)
        })
        .collect()
}

#[test]
fn rerank_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_index(dir.path(), false);
    let q = query();
    let names: Vec<CString> = ["d3", "d0", "d5", "d1"]
        .iter()
        .map(|s| CString::new(*s).unwrap())
        .collect();
    let ids: Vec<*const std::ffi::c_char> = names.iter().map(|c| c.as_ptr()).collect();
    let mut index = ptr::null_mut();
    let mut results = ptr::null_mut();
    unsafe {
        assert_eq!(lateri_index_open(path.as_ptr(), &mut index), LateriStatus::Ok);
        let st = lateri_rerank(
            index,
            q.as_ptr(),
            32,
            DIM,
            ids.as_ptr(),
            ids.len(),
            LateriScorer::MaxSim as u32,
            LateriMetric::Dot as u32,
            &mut results,
        );
        assert_eq!(st, LateriStatus::Ok);
    }
    let got = ranked(results);

    let lib_index = lateri::load_index(Path::new(path.to_str().unwrap())).unwrap();
    let qm = TokenEmbeddingMatrix::new(32, DIM, q).unwrap();
    let want = lateri::rerank(
        &qm,
        &["d3", "d0", "d5", "d1"],
        &lib_index,
        lateri::SimilarityMetric::Dot,
    )
    .unwrap();
    assert_eq!(got.len(), want.len());
    for ((id, score, rank), w) in got.iter().zip(&want) {
        assert_eq!(id, &w.passage_id);
        assert_eq!(score.to_bits(), w.score.to_bits());
        assert_eq!(*rank as usize, w.rank);
    }
    unsafe {
        let mut id = ptr::null();
        assert_eq!(
            lateri_results_get(results, 99, &mut id, ptr::null_mut(), ptr::null_mut()),
            LateriStatus::InvalidArgument
        );
        lateri_results_free(results);
        lateri_index_free(index);
    }
}

#[test]
fn rerank_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_index(dir.path(), true);
    let q = query();
    let unknown = CString::new("nope").unwrap();
    let ids = [unknown.as_ptr()];
    let mut index = ptr::null_mut();
    let mut results = ptr::null_mut();
    unsafe {
        assert_eq!(lateri_index_open(path.as_ptr(), &mut index), LateriStatus::Ok);
        let st = lateri_rerank(index, q.as_ptr(), 32, DIM, ids.as_ptr(), 1, 1, 0, &mut results);
        assert_eq!(st, LateriStatus::UnknownPassage);
        assert!(results.is_null());
        let st = lateri_rerank(index, q.as_ptr(), 32, DIM, ids.as_ptr(), 1, 7, 0, &mut results);
        assert_eq!(st, LateriStatus::InvalidArgument);
        let good = CString::new("d1").unwrap();
        let ids = [good.as_ptr()];
        let st = lateri_rerank(index, q.as_ptr(), 31, DIM, ids.as_ptr(), 1, 1, 0, &mut results);
        assert_eq!(st, LateriStatus::Shape);
        // A dense scorer cannot read a bit index.
        let st = lateri_rerank(index, q.as_ptr(), 32, DIM, ids.as_ptr(), 1, 0, 1, &mut results);
        assert_eq!(st, LateriStatus::Shape);
        let st = lateri_rerank(index, q.as_ptr(), 32, DIM, ids.as_ptr(), 1, 2, 0, &mut results);
        assert_eq!(st, LateriStatus::Ok);
        assert_eq!(lateri_results_len(results), 1);
        lateri_results_free(results);
        lateri_index_free(index);
    }
}

#[test]
fn scalar_entry_points() {
    let q = query();
    let d: Vec<f32> = (0..2).flat_map(row).collect();
    let mut score = 0.0;
    unsafe {
        let st = lateri_maxsim(q.as_ptr(), 32, d.as_ptr(), 2, DIM, LateriMetric::Dot as u32, &mut score);
        assert_eq!(st, LateriStatus::Ok);
        let st = lateri_maxsim(
            q.as_ptr(),
            32,
            d.as_ptr(),
            2,
            DIM,
            LateriMetric::Cosine as u32,
            &mut score,
        );
        assert_eq!(st, LateriStatus::NotNormalized);
        let st = lateri_maxsim(q.as_ptr(), 32, d.as_ptr(), 2, DIM, 9, &mut score);
        assert_eq!(st, LateriStatus::InvalidArgument);
    }
    let qm = TokenEmbeddingMatrix::new(32, DIM, q.clone()).unwrap();
    let dm = TokenEmbeddingMatrix::new(2, DIM, d.clone()).unwrap();
    let mut dot = 0.0;
    unsafe { lateri_maxsim(q.as_ptr(), 32, d.as_ptr(), 2, DIM, 1, &mut dot) };
    assert_eq!(
        dot,
        lateri::maxsim_score(&qm, &dm, lateri::SimilarityMetric::Dot).unwrap()
    );

    let a = [0xFFu64];
    let b = [0x0Fu64];
    let mut pd = 0i64;
    unsafe {
        assert_eq!(
            lateri_packed_dot(a.as_ptr(), b.as_ptr(), 1, 8, &mut pd),
            LateriStatus::Ok
        );
        assert_eq!(pd, 0);
        assert_eq!(
            lateri_packed_dot(a.as_ptr(), a.as_ptr(), 1, 8, &mut pd),
            LateriStatus::Ok
        );
        assert_eq!(pd, 8);
        assert_eq!(
            lateri_packed_dot(ptr::null(), a.as_ptr(), 1, 8, &mut pd),
            LateriStatus::NullPointer
        );
    }

    let mut bytes = 0u64;
    unsafe {
        assert_eq!(
            lateri_estimate_index_size(10, 4.0, 128, 2, &mut bytes),
            LateriStatus::Ok
        );
        assert_eq!(bytes, 40 * 16);
        assert_eq!(
            lateri_estimate_index_size(10, 4.0, 128, 0, &mut bytes),
            LateriStatus::Ok
        );
        assert_eq!(bytes, 40 * 512);
        assert_eq!(
            lateri_estimate_index_size(10, 4.0, 128, 5, &mut bytes),
            LateriStatus::InvalidArgument
        );
    }
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lateri.h")).unwrap();
    for name in [
        "lateri_index_open",
        "lateri_rerank",
        "lateri_rerank_poly",
        "lateri_results_get",
        "lateri_last_error",
        "typedef struct LateriIndex LateriIndex",
        "LATERI_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
