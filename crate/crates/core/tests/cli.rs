use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn bindecomp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bindecomp")).args(args).current_dir(dir).env_remove("BINDECOMP_SEED").output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = bindecomp(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn manifest(dir: &Path, out: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{out}.manifest.json"))).unwrap()).unwrap()
}

/// ingest, prep-asm, prep-src and train-bpe into `dir/work`.
fn prepare(dir: &Path) {
    let raw = fixtures().join("juliet-mini");
    ok(dir, &["ingest", "--in", raw.to_str().unwrap(), "--out", "work/corpus.jsonl"]);
    ok(dir, &["prep-asm", "--in", "work/corpus.jsonl", "--out", "work/asm.jsonl"]);
    ok(dir, &["prep-src", "--in", "work/asm.jsonl", "--out", "work/prepped.jsonl"]);
    ok(dir, &["train-bpe", "--in", "work/prepped.jsonl", "--merges", "300", "--out", "work/tokenizers.json"]);
}

#[test]
fn help_exits_zero_and_lists_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = bindecomp(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["ingest", "prep-asm", "prep-src", "train-bpe", "toss-reduce", "split", "train-decompiler", "evaluate", "report"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bindecomp(dir.path(), &["split", "--fraction", "0.2"]).status.code(), Some(1));
    assert_eq!(bindecomp(dir.path(), &["no-such-command"]).status.code(), Some(1));
    let missing = bindecomp(dir.path(), &["prep-src", "--in", "absent.jsonl", "--out", "x.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), "{ \"test_fraction\": 3.0 }").unwrap();
    let bad_config = bindecomp(dir.path(), &["--config", "bad.json", "ingest", "--in", "raw", "--out", "c.jsonl"]);
    assert_eq!(bad_config.status.code(), Some(1));
}

#[test]
fn every_stage_writes_a_manifest_with_digests() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    let m = manifest(dir.path(), "work/prepped.jsonl");
    assert_eq!(m["subcommand"], "prep-src");
    assert_eq!(m["toolkit_version"], env!("CARGO_PKG_VERSION"));
    let input_digest = &m["inputs"]["work/asm.jsonl"];
    assert_eq!(input_digest, &manifest(dir.path(), "work/asm.jsonl")["outputs"]["work/asm.jsonl"]);
    assert_eq!(m["outputs"]["work/prepped.jsonl"].as_str().unwrap().len(), 64);
}

#[test]
fn tokenize_writes_one_record_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    ok(dir.path(), &["tokenize", "--in", "work/prepped.jsonl", "--tokenizers", "work/tokenizers.json", "--out", "work/tokens.jsonl"]);
    let text = std::fs::read_to_string(dir.path().join("work/tokens.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 32);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first.get("id").is_some());
}

#[test]
fn seed_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    let split = |seed_env: Option<&str>, extra: &[&str], out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_bindecomp"));
        cmd.current_dir(dir.path()).env_remove("BINDECOMP_SEED");
        if let Some(s) = seed_env {
            cmd.env("BINDECOMP_SEED", s);
        }
        let status = cmd.args(extra).args(["split", "--in", "work/prepped.jsonl", "--out", out]).status().unwrap();
        assert!(status.success());
        manifest(dir.path(), out)["seed"].as_u64().unwrap()
    };
    assert_eq!(split(Some("41"), &[], "work/env"), 41);
    assert_eq!(split(Some("41"), &["--seed", "5"], "work/flag"), 5);
    assert_eq!(split(None, &[], "work/default"), 0);
}

#[test]
fn baseline_evaluation_and_report() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    ok(dir.path(), &["split", "--in", "work/prepped.jsonl", "--out", "work/split"]);
    ok(dir.path(), &["evaluate", "--task", "decompile", "--baseline", "identity", "--in", "work/split/test.jsonl", "--out", "work/identity.json"]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("work/identity.json")).unwrap()).unwrap();
    assert_eq!(report["scores"]["edit_similarity"], 1.0);
    ok(dir.path(), &["report", "--in", "work/identity.json", "--out", "work/report.txt"]);
    let table = std::fs::read_to_string(dir.path().join("work/report.txt")).unwrap();
    assert!(table.contains("identity"), "{table}");
}

#[test]
fn trained_decompiler_translates_a_corpus() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path());
    let config = fixtures().join("smoke-config.json");
    let config = config.to_str().unwrap();
    ok(dir.path(), &["split", "--in", "work/prepped.jsonl", "--out", "work/split"]);
    ok(dir.path(), &["--config", config, "train-decompiler", "--in", "work/split/train.jsonl", "--tokenizers", "work/tokenizers.json", "--out", "work/model.json"]);
    assert!(dir.path().join("work/model.json.loss.csv").exists());
    ok(dir.path(), &["decompile", "--in", "work/split/test.jsonl", "--model", "work/model.json", "--out", "work/decompiled.jsonl"]);
    let text = std::fs::read_to_string(dir.path().join("work/decompiled.jsonl")).unwrap();
    let test_pairs = std::fs::read_to_string(dir.path().join("work/split/test.jsonl")).unwrap().lines().count();
    assert_eq!(text.lines().count(), test_pairs);
}
