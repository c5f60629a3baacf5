use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/toy")
        .join(name)
}

fn qgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgen"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = qgen(args);
    assert!(
        out.status.success(),
        "qgen {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stages_run_separately_match_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (kb, templates, lm, emb, corpus) = (
        toy("kb.tsv"),
        toy("templates.tsv"),
        toy("lm_corpus.txt"),
        toy("embeddings.txt"),
        toy("suggestions.txt"),
    );
    let full = dir.path().join("full");
    ok(&[
        "pipeline",
        "--kb",
        s(&kb),
        "--templates",
        s(&templates),
        "--lm",
        s(&lm),
        "--embeddings",
        s(&emb),
        "--provider",
        "mock",
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&full),
    ]);

    let step = dir.path().join("step");
    ok(&[
        "seeds",
        "--kb",
        s(&kb),
        "--templates",
        s(&templates),
        "--out-dir",
        s(&step),
    ]);
    let seeds = step.join("seeds.jsonl");
    ok(&[
        "expand",
        "--seeds",
        s(&seeds),
        "--provider",
        "mock",
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&step),
    ]);
    ok(&[
        "score",
        "--input",
        s(&seeds),
        s(&step.join("expanded.jsonl")),
        "--seeds",
        s(&seeds),
        "--lm",
        s(&lm),
        "--embeddings",
        s(&emb),
        "--out-dir",
        s(&step),
    ]);
    ok(&[
        "select",
        "--input",
        s(&step.join("scored.jsonl")),
        "--out-dir",
        s(&step),
    ]);

    for name in [
        "seeds.jsonl",
        "expanded.jsonl",
        "scored.jsonl",
        "selected.jsonl",
    ] {
        assert_eq!(
            fs::read(full.join(name)).unwrap(),
            fs::read(step.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "kb = {:?}\ntemplates = {:?}\nlm = {:?}\nembeddings = {:?}\nprovider = \"mock\"\ncorpus = {:?}\ntop_k = 100\nout_dir = {:?}\n",
            toy("kb.tsv"),
            toy("templates.tsv"),
            toy("lm_corpus.txt"),
            toy("embeddings.txt"),
            toy("suggestions.txt"),
            dir.path().join("from-file"),
        ),
    )
    .unwrap();
    let out = dir.path().join("from-flag");
    ok(&[
        "pipeline",
        "--config",
        s(&config),
        "--top-k",
        "3",
        "--t-rel",
        "-inf",
        "--out-dir",
        s(&out),
    ]);
    let selected = fs::read_to_string(out.join("selected.jsonl")).unwrap();
    assert_eq!(selected.lines().count(), 3);
    let snapshot = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(snapshot.contains("top_k = 3"), "{snapshot}");
    assert!(!dir.path().join("from-file").exists());
}

#[test]
fn failures_exit_with_the_stage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "subject\tpredicate\n").unwrap();
    let out = qgen(&[
        "seeds",
        "--kb",
        s(&bad),
        "--templates",
        s(&toy("templates.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&out.stderr).contains("load_kb"));

    let out = qgen(&["pipeline", "--kb", s(&dir.path().join("missing.tsv"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = qgen(&["pipeline", "--config", s(&dir.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_reports_precision_and_single_labels() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.txt");
    let test = dir.path().join("test.txt");
    fs::write(&train, "how to use a jigsaw tools\nsharpen a chisel tools\ncook rice in a pressure cooker kitchen\nfrying chicken in olive oil kitchen\n").unwrap();
    fs::write(
        &test,
        "jigsaw blade tools\nbench grinder chisel tools\nrice cooker kitchen\nzzz qqq kitchen\n",
    )
    .unwrap();
    let emb = toy("embeddings.txt");
    let report = ok(&[
        "classify",
        "--embeddings",
        s(&emb),
        "--train",
        s(&train),
        "--test",
        s(&test),
        "--format",
        "label-last",
    ]);
    assert!(report.contains("documents\t4"), "{report}");
    assert!(report.contains("predicted\t3"), "{report}");
    assert!(report.contains("precision\t100.00"), "{report}");

    let one = ok(&[
        "classify",
        "--embeddings",
        s(&emb),
        "--train",
        s(&train),
        "--format",
        "label-last",
        "--text",
        "how to sharpen a drill bit",
    ]);
    assert!(one.starts_with("tools\t"), "{one}");
}

#[test]
fn trained_lm_exports_arpa_usable_by_score() {
    let dir = tempfile::tempdir().unwrap();
    let arpa = dir.path().join("toy.arpa");
    ok(&[
        "train-lm",
        "--corpus",
        s(&toy("lm_corpus.txt")),
        "--order",
        "3",
        "--out",
        s(&arpa),
    ]);
    assert!(fs::read_to_string(&arpa).unwrap().contains("\\data\\"));
    ok(&[
        "seeds",
        "--kb",
        s(&toy("kb.tsv")),
        "--templates",
        s(&toy("templates.tsv")),
        "--out-dir",
        s(dir.path()),
    ]);
    let seeds = dir.path().join("seeds.jsonl");
    ok(&[
        "score",
        "--input",
        s(&seeds),
        "--seeds",
        s(&seeds),
        "--lm",
        s(&arpa),
        "--embeddings",
        s(&toy("embeddings.txt")),
        "--out-dir",
        s(dir.path()),
    ]);
    let stats = ok(&["stats", "--kb", s(&toy("kb.tsv"))]);
    assert!(stats.starts_with("triples\t12\npredicates\t4\n"), "{stats}");
}
