use std::path::Path;
use std::process::{Command, Output};

use lateri::cli::{EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn lateri(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lateri"))
        .args(args)
        .env_remove("LATERI_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = lateri(args);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path) {
    ok(&[
        "synth-corpus",
        "--out",
        s(dir),
        "--passages",
        "120",
        "--queries",
        "6",
        "--candidates",
        "20",
        "--dim",
        "32",
        "--seed",
        "3",
    ]);
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(lateri(&["--help"]).status.code(), Some(EXIT_OK));
    assert_eq!(lateri(&["--version"]).status.code(), Some(EXIT_OK));
    assert_eq!(lateri(&[]).status.code(), Some(EXIT_USAGE));
    assert_eq!(lateri(&["rerank"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(
        lateri(&["evaluate", "--run", "a", "--qrels", "b", "--k", "0"])
            .status
            .code(),
        Some(EXIT_USAGE)
    );
    assert_eq!(lateri(&["bogus"]).status.code(), Some(EXIT_USAGE));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.lirx");
    assert_eq!(
        lateri(&["validate-index", "--index", s(&missing)]).status.code(),
        Some(EXIT_DATA)
    );
    let junk = dir.path().join("junk.lirx");
    std::fs::write(&junk, b"not an index at all, just some bytes").unwrap();
    let out = lateri(&["validate-index", "--index", s(&junk)]);
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&out.stdout).contains("magic"));
}

#[test]
fn pipeline_for_every_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    let index = d.join("index.lirx");
    let bits = d.join("bits.lirx");
    let poly = d.join("poly.lirx");
    ok(&[
        "build-index",
        "--shard",
        s(&d.join("passages.shard")),
        "--out",
        s(&index),
    ]);
    ok(&[
        "build-index",
        "--shard",
        s(&d.join("passages.shard")),
        "--out",
        s(&bits),
        "--quantize",
    ]);
    ok(&[
        "build-index",
        "--shard",
        s(&d.join("poly_passages.shard")),
        "--out",
        s(&poly),
        "--dtype",
        "f16",
    ]);
    let validated = ok(&["validate-index", "--index", s(&index)]);
    assert!(validated.contains("violations=0"), "{validated}");

    let queries = d.join("queries.shard");
    let candidates = d.join("candidates.run");
    let qrels = d.join("qrels.txt");
    let codes = d.join("polycodes.shard");
    let runs: [(&Path, Vec<&str>); 6] = [
        (&index, vec!["--scorer", "maxsim", "--metric", "l2"]),
        (&index, vec!["--scorer", "maxsim", "--metric", "dot"]),
        (&index, vec!["--scorer", "maxsim", "--metric", "cosine"]),
        (&bits, vec!["--scorer", "maxsim-binary", "--mode", "asymmetric"]),
        (&bits, vec!["--scorer", "maxsim-binary", "--mode", "symmetric"]),
        (&poly, vec!["--scorer", "poly", "--codes", s(&codes)]),
    ];
    for (i, (idx, extra)) in runs.iter().enumerate() {
        let run = d.join(format!("run{i}.txt"));
        let mut args = vec![
            "rerank",
            "--index",
            s(idx),
            "--queries",
            s(&queries),
            "--candidates",
            s(&candidates),
            "--out",
            s(&run),
            "--threads",
            "3",
        ];
        args.extend(extra);
        ok(&args);
        let text = std::fs::read_to_string(&run).unwrap();
        assert_eq!(text.lines().count(), 6 * 20, "{extra:?}");
        let metrics = ok(&["evaluate", "--run", s(&run), "--qrels", s(&qrels), "--per-query"]);
        assert!(metrics.contains("ndcg@10") && metrics.contains("mrr@10"), "{metrics}");
    }
    // Dot and cosine coincide on unit-norm synthetic embeddings.
    let dot = std::fs::read_to_string(d.join("run1.txt")).unwrap();
    let cos = std::fs::read_to_string(d.join("run2.txt")).unwrap();
    let ids = |t: &str| {
        t.lines()
            .map(|l| l.split(' ').nth(2).unwrap().to_owned())
            .collect::<Vec<_>>()
    };
    assert_eq!(ids(&dot), ids(&cos));

    // A dense scorer against a bit index is a data error.
    let out = lateri(&[
        "rerank",
        "--index",
        s(&bits),
        "--queries",
        s(&queries),
        "--candidates",
        s(&candidates),
        "--out",
        s(&d.join("bad.txt")),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    // Poly without codes is a usage error.
    let out = lateri(&[
        "rerank",
        "--index",
        s(&poly),
        "--queries",
        s(&queries),
        "--candidates",
        s(&candidates),
        "--out",
        s(&d.join("bad.txt")),
        "--scorer",
        "poly",
    ]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
}

#[test]
fn threads_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    let index = d.join("index.lirx");
    ok(&[
        "build-index",
        "--shard",
        s(&d.join("passages.shard")),
        "--out",
        s(&index),
    ]);
    let run = |threads: &str, out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_lateri"))
            .args([
                "rerank",
                "--index",
                s(&index),
                "--queries",
                s(&d.join("queries.shard")),
                "--candidates",
                s(&d.join("candidates.run")),
                "--out",
                s(out),
            ])
            .env("LATERI_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("1", &d.join("a.txt")).status.code(), Some(EXIT_OK));
    assert_eq!(run("4", &d.join("b.txt")).status.code(), Some(EXIT_OK));
    assert_eq!(
        std::fs::read(d.join("a.txt")).unwrap(),
        std::fs::read(d.join("b.txt")).unwrap()
    );
    assert_eq!(run("zero", &d.join("c.txt")).status.code(), Some(EXIT_USAGE));
}

#[test]
fn bench_estimate_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    let index = d.join("index.lirx");
    ok(&[
        "build-index",
        "--shard",
        s(&d.join("passages.shard")),
        "--out",
        s(&index),
    ]);
    let report = ok(&[
        "bench",
        "--index",
        s(&index),
        "--queries",
        s(&d.join("queries.shard")),
        "--candidate-count",
        "50",
        "--repeats",
        "2",
        "--warmup",
        "1",
        "--threads",
        "2",
    ]);
    assert!(
        report.contains("stage=query_prep") && report.contains("stage=rank"),
        "{report}"
    );
    assert!(report.contains("ideal upper bound"), "{report}");

    let est = ok(&[
        "estimate-size",
        "--passages",
        "1000",
        "--avg-tokens",
        "50",
        "--dim",
        "256",
        "--dtype",
        "bit",
        "--reference-dim",
        "64",
    ]);
    assert!(
        est.contains("payload_bytes=1600000") && est.contains("=8.0000"),
        "{est}"
    );

    let table = ok(&["analyze-context"]);
    assert!(table.starts_with("label\tbin_lo\tbin_hi\tcount\n"), "{table}");
    let out = d.join("hist.tsv");
    let norms = ok(&["analyze-context", "--context-mix", "0", "--out", s(&out)]);
    assert!(norms.contains("same_word_diff_sentence\t0.000000"), "{norms}");
    assert!(std::fs::read_to_string(&out).unwrap().lines().count() > 3 * 40);
    assert_eq!(
        lateri(&["analyze-context", "--context-mix", "2"]).status.code(),
        Some(EXIT_DATA)
    );
}
