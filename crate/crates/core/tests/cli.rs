//! End-to-end runs of the `crfrl` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SPEC: &str = r#"
count = 6
validation_fraction = 0.34

[instance]
width = 3
height = 3
num_labels = 3
hop2_cliques = 1
seed = 4
"#;

fn crfrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crfrl")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = crfrl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs generate, train, infer, eval and export-embeddings into `root`.
fn pipeline(root: &Path, spec: &Path) -> Vec<PathBuf> {
    let data = root.join("data.jsonl");
    let train = root.join("train");
    let infer = root.join("infer");
    let eval = root.join("eval");
    let emb = root.join("emb");
    ok(&["generate", "--spec", s(spec), "--out", s(&data)]);
    ok(&["train", "--dataset", s(&data), "--out", s(&train), "--epochs", "1", "--seed", "9"]);
    let params = train.join("params.json");
    ok(&["infer", "--params", s(&params), "--instances", s(&data), "--out", s(&infer), "--trace"]);
    let dqn = format!("dqn={}", s(&infer.join("labelings.jsonl")));
    ok(&["eval", "--dataset", s(&data), "--out", s(&eval), "--params", s(&params), "--labelings", &dqn, "--histogram"]);
    ok(&["export-embeddings", "--params", s(&params), "--instances", s(&data), "--out", s(&emb)]);
    let mut files = vec![data];
    for dir in [train, infer, eval, emb] {
        let mut names: Vec<PathBuf> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "timing.jsonl")
            .collect();
        names.sort();
        files.extend(names);
    }
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, SPEC).unwrap();
    let a = pipeline(&dir.path().join("a"), &spec);
    let b = pipeline(&dir.path().join("b"), &spec);
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 12, "{a:?}");
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.file_name(), y.file_name());
        assert!(fs::read(x).unwrap() == fs::read(y).unwrap(), "{} differs", x.display());
    }
}

#[test]
fn exit_codes_name_the_failure() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = dir.path().join("out");
    assert_eq!(crfrl(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(crfrl(&["generate", "--spec", s(&missing), "--out", s(&out)]).status.code(), Some(4));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "count = 3\n[instance]\nwidth = 3\n").unwrap();
    let res = crfrl(&["generate", "--spec", s(&bad), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("height"));
}
