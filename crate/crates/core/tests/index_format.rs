mod common;

use std::collections::BTreeMap;

use common::{random_matrix, random_records, rng};
use lateri::index::{
    build_index, encode_index, read_shard, validate_index, validate_index_bytes, validate_shard, write_shard,
    BuildOptions, EmbeddingShard, ShardKind, ViolationKind, HEADER_LEN, INDEX_MAGIC,
};
use lateri::{binarize, load_index, DType, Error, PassageRecord, RerankIndex, TokenEmbeddingMatrix};
use proptest::prelude::*;

fn shard_with(dim: usize, ids: &[&str], seed: u64) -> EmbeddingShard {
    let mut r = rng(seed);
    let mut shard = EmbeddingShard::new(DType::F32, dim).unwrap();
    for (i, id) in ids.iter().enumerate() {
        shard.push(*id, random_matrix(&mut r, 1 + i % 5, dim)).unwrap();
    }
    shard
}

#[test]
fn header_layout_is_exact() {
    let records = random_records(&mut rng(1), 3, 2..=2, 16);
    let (bytes, report) = encode_index(records, 16, BuildOptions::default()).unwrap();
    assert_eq!(&bytes[0..4], &INDEX_MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(bytes[8], 0);
    assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 16);
    assert_eq!(u64::from_le_bytes(bytes[13..21].try_into().unwrap()), 3);
    // First entry: "p0000", 2 rows, offset 0.
    assert_eq!(u16::from_le_bytes([bytes[21], bytes[22]]), 5);
    assert_eq!(&bytes[23..28], b"p0000");
    assert_eq!(u16::from_le_bytes([bytes[28], bytes[29]]), 2);
    assert_eq!(u64::from_le_bytes(bytes[30..38].try_into().unwrap()), 0);
    assert_eq!(report.id_table_bytes, 3 * (2 + 5 + 2 + 8));
    assert_eq!(
        bytes.len() as u64,
        HEADER_LEN as u64 + report.id_table_bytes + report.payload_bytes
    );
}

#[test]
fn build_merges_shards_and_rejects_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.shard");
    let b = dir.path().join("b.shard");
    write_shard(&a, &shard_with(8, &["z", "m"], 1)).unwrap();
    write_shard(&b, &shard_with(8, &["a", "q"], 2)).unwrap();
    let out = dir.path().join("x.lirx");
    let report = build_index(&[&a, &b], &out, BuildOptions::default()).unwrap();
    assert_eq!(report.record_count, 4);
    let index = load_index(&out).unwrap();
    assert_eq!(index.ids().collect::<Vec<_>>(), ["a", "m", "q", "z"]);

    let dup = dir.path().join("dup.shard");
    write_shard(&dup, &shard_with(8, &["m"], 3)).unwrap();
    let err = build_index(&[&a, &dup], &out, BuildOptions::default()).unwrap_err();
    assert!(matches!(err, Error::DuplicatePassage(ref id) if id == "m"), "{err}");

    let wide = dir.path().join("wide.shard");
    write_shard(&wide, &shard_with(16, &["w"], 4)).unwrap();
    assert!(matches!(
        build_index(&[&a, &wide], &out, BuildOptions::default()),
        Err(Error::Incompatible(_))
    ));
}

#[test]
fn bit_index_stores_sign_bits() {
    let records = random_records(&mut rng(2), 5, 1..=7, 24);
    let (bytes, report) = encode_index(
        records.clone(),
        24,
        BuildOptions {
            dtype: DType::F32,
            quantize: true,
        },
    )
    .unwrap();
    assert_eq!(report.dtype, DType::Bit);
    assert_eq!(report.payload_bytes, report.token_count * 3);
    let index = RerankIndex::from_bytes(bytes).unwrap();
    for (id, rec) in &records {
        let want = binarize(rec.as_dense().unwrap()).unwrap();
        assert_eq!(index.get_passage(id).unwrap().as_packed().unwrap(), &want);
    }
}

#[test]
fn oversized_passages_and_unaligned_bits_are_rejected() {
    let mut r = rng(3);
    let big: BTreeMap<_, _> = [("big".to_string(), PassageRecord::Dense(random_matrix(&mut r, 193, 4)))].into();
    assert!(encode_index(big, 4, BuildOptions::default()).is_err());
    let odd: BTreeMap<_, _> = [("odd".to_string(), PassageRecord::Dense(random_matrix(&mut r, 2, 12)))].into();
    let opts = BuildOptions {
        dtype: DType::F32,
        quantize: true,
    };
    assert!(matches!(encode_index(odd, 12, opts), Err(Error::NotByteAligned(12))));
}

#[test]
fn load_rejects_damaged_files() {
    let records = random_records(&mut rng(4), 6, 1..=3, 8);
    let (bytes, _) = encode_index(records, 8, BuildOptions::default()).unwrap();

    assert!(matches!(
        RerankIndex::from_bytes(bytes[..bytes.len() - 3].to_vec()),
        Err(Error::Truncated(_))
    ));
    assert!(matches!(
        RerankIndex::from_bytes(bytes[..10].to_vec()),
        Err(Error::Truncated(_))
    ));
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(RerankIndex::from_bytes(long.clone()), Err(Error::Corrupt(_))));
    assert!(validate_index_bytes(&long).has(ViolationKind::TrailingBytes));

    let mut version = bytes.clone();
    version[4] = 9;
    assert!(matches!(
        RerankIndex::from_bytes(version.clone()),
        Err(Error::UnsupportedVersion(9))
    ));
    assert!(validate_index_bytes(&version).has(ViolationKind::UnsupportedVersion));

    let mut magic = bytes.clone();
    magic[3] = b'?';
    assert!(matches!(RerankIndex::from_bytes(magic), Err(Error::BadMagic)));

    let mut dtype = bytes;
    dtype[8] = 7;
    assert!(!validate_index_bytes(&dtype).is_clean());
    assert!(RerankIndex::from_bytes(dtype).is_err());
}

#[test]
fn missing_passage_is_reported() {
    let records = random_records(&mut rng(5), 2, 1..=1, 4);
    let (bytes, _) = encode_index(records, 4, BuildOptions::default()).unwrap();
    let index = RerankIndex::from_bytes(bytes).unwrap();
    assert!(matches!(index.get_passage("nope"), Err(Error::UnknownPassage(_))));
    assert!(index.contains("p0001"));
}

#[test]
fn shard_files_validate_by_kind() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(6);
    let mut queries = EmbeddingShard::new(DType::F32, 8).unwrap();
    queries.push("1", random_matrix(&mut r, 32, 8)).unwrap();
    let qpath = dir.path().join("q.shard");
    write_shard(&qpath, &queries).unwrap();
    assert!(validate_shard(&qpath, ShardKind::Query).unwrap().is_clean());
    assert_eq!(read_shard(&qpath).unwrap(), queries);

    let ppath = dir.path().join("p.shard");
    write_shard(&ppath, &shard_with(8, &["a", "b"], 7)).unwrap();
    let report = validate_shard(&ppath, ShardKind::Query).unwrap();
    assert!(report.has(ViolationKind::BadRowCount));
    assert!(validate_shard(&ppath, ShardKind::Passage).unwrap().is_clean());

    let mut nan = EmbeddingShard::new(DType::F32, 2).unwrap();
    nan.push("n", TokenEmbeddingMatrix::new(1, 2, vec![1.0, f32::NAN]).unwrap())
        .unwrap();
    let npath = dir.path().join("n.shard");
    write_shard(&npath, &nan).unwrap();
    assert!(validate_shard(&npath, ShardKind::Any)
        .unwrap()
        .has(ViolationKind::NonFiniteValue));
}

#[test]
fn validate_index_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.lirx");
    let (bytes, _) = encode_index(random_records(&mut rng(8), 4, 1..=4, 8), 8, BuildOptions::default()).unwrap();
    std::fs::write(&path, &bytes).unwrap();
    let report = validate_index(&path).unwrap();
    assert!(report.is_clean());
    assert_eq!(report.record_count, 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn build_load_is_identity(
        seed in any::<u64>(),
        count in 1usize..20,
        dim in prop::sample::select(vec![1usize, 3, 8, 33]),
        f16 in any::<bool>(),
    ) {
        let records = random_records(&mut rng(seed), count, 1..=192, dim);
        let dtype = if f16 { DType::F16 } else { DType::F32 };
        let (bytes, report) = encode_index(records.clone(), dim, BuildOptions { dtype, quantize: false }).unwrap();
        prop_assert_eq!(bytes.len() as u64, report.file_bytes);
        let index = RerankIndex::from_bytes(bytes).unwrap();
        prop_assert_eq!(index.len(), count);
        for (id, rec) in &records {
            let got = index.get_passage(id).unwrap();
            let got = got.as_dense().unwrap();
            let want = rec.as_dense().unwrap();
            prop_assert_eq!(got.rows(), want.rows());
            for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
                let w = if f16 { half::f16::from_f32(*w).to_f32() } else { *w };
                prop_assert_eq!(g.to_bits(), w.to_bits());
            }
        }
    }
}
