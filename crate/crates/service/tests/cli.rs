//! End-to-end tests of the `fablegen` binary on the fixture corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn fablegen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fablegen"))
        .args(args)
        .current_dir(repo_root())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fablegen(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn golden_lines(name: &str, story: &str) -> Vec<String> {
    std::fs::read_to_string(repo_root().join("fixtures/golden").join(name))
        .unwrap()
        .lines()
        .filter(|l| serde_json::from_str::<Value>(l).unwrap()["story_id"] == story)
        .map(str::to_string)
        .collect()
}

#[test]
fn run_reproduces_the_pipeline_golden() {
    let stdout = ok(&["run", "--split", "test", "--top-n", "3"]);
    let lines: Vec<String> = stdout.lines().map(str::to_string).collect();
    assert_eq!(lines, golden_lines("three_stage.jsonl", "ali-baba"));

    let stdout = ok(&["run", "--book", "fixtures/corpus/stories/ali-baba.json", "--mode", "two-step", "--workers", "1"]);
    let lines: Vec<String> = stdout.lines().map(str::to_string).collect();
    assert_eq!(lines, golden_lines("two_step.jsonl", "ali-baba"));
}

#[test]
fn run_rejects_ambiguous_input() {
    let out = fablegen(&["run", "--split", "test", "--book", "fixtures/corpus/stories/ali-baba.json"]);
    assert!(!out.status.success());
    let out = fablegen(&["run", "--split", "test", "--top-n", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn eval_reports_each_system_and_n() {
    let dir = tempfile::tempdir().unwrap();
    let three = dir.path().join("three.jsonl");
    let two = dir.path().join("two.jsonl");
    ok(&["run", "--split", "test", "--out", p(&three)]);
    ok(&["run", "--split", "test", "--mode", "two-step", "--out", p(&two)]);
    let report = dir.path().join("report.json");
    let table = ok(&[
        "eval", "--gold", "fixtures/corpus", "--pred", p(&three), "--pred", p(&two), "--n", "1,3", "--out", p(&report),
    ]);
    assert!(table.contains("three_stage") && table.contains("two_step"), "{table}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let text = v.to_string();
    for needle in ["three_stage", "two_step"] {
        assert!(text.contains(needle), "{text}");
    }
    for m in find_numbers(&v) {
        assert!((0.0..=1.0).contains(&m), "{m}");
    }
}

fn find_numbers(v: &Value) -> Vec<f64> {
    match v {
        Value::Number(n) => n.as_f64().into_iter().filter(|x| x.fract() != 0.0).collect(),
        Value::Array(a) => a.iter().flat_map(find_numbers).collect(),
        Value::Object(o) => o.values().flat_map(find_numbers).collect(),
        _ => Vec::new(),
    }
}

#[test]
fn extract_json_matches_the_candidate_golden() {
    let stdout = ok(&["extract", "--book", "fixtures/corpus/stories/ali-baba.json", "--section", "1", "--json"]);
    let got: Value = serde_json::from_str(&stdout).unwrap();
    let golden: Value = serde_json::from_str(
        &std::fs::read_to_string(repo_root().join("crates/core/tests/golden/candidates/ali-baba-1.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(got, golden);
    let out = fablegen(&["extract", "--book", "fixtures/corpus/stories/ali-baba.json", "--section", "9"]);
    assert!(!out.status.success());
}

#[test]
fn rank_keeps_at_most_top_n_per_section() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.jsonl");
    ok(&["run", "--split", "test", "--top-n", "10", "--out", p(&pool)]);
    let stdout = ok(&["rank", "--input", p(&pool), "--top-n", "2"]);
    let mut per_section = std::collections::BTreeMap::<(String, u64), usize>::new();
    for line in stdout.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        *per_section.entry((v["story_id"].as_str().unwrap().into(), v["section_index"].as_u64().unwrap())).or_default() += 1;
    }
    assert_eq!(per_section.len(), 3);
    assert!(per_section.values().all(|&c| c <= 2));
}

#[test]
fn train_ranker_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("ranker");
    ok(&["train-ranker", "--split", "train", "--epochs", "3", "--out", p(&model)]);
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(model.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics.is_object());
    let stdout = ok(&["run", "--split", "test", "--ranker-dir", p(&model), "--top-n", "2"]);
    assert!(!stdout.trim().is_empty());
}

#[test]
fn train_qg_lowers_the_loss_and_reports_external_failures() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("qg.json");
    let metrics = dir.path().join("metrics.jsonl");
    let stdout = ok(&["train-qg", "--epochs", "3", "--out", p(&model), "--metrics", p(&metrics)]);
    let curve: Value = serde_json::from_str(&stdout).unwrap();
    let initial = curve["initial"].as_f64().unwrap();
    let per_epoch: Vec<f64> = curve["per_epoch"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(per_epoch.len(), 3);
    assert!(per_epoch[2] < initial, "{curve}");
    assert!(model.exists());
    ok(&["run", "--split", "test", "--qg-model", p(&model), "--top-n", "1"]);

    let external = dir.path().join("external.jsonl");
    std::fs::write(&external, "{\"input\": \"a fox <sep> the fox ran\", \"target\": \"Who ran?\"}\n").unwrap();
    let both = dir.path().join("both.json");
    let both_metrics = dir.path().join("both-metrics.json");
    let args = ["train-qg", "--epochs", "1", "--train-source", "both", "--external-pairs", p(&external)];
    ok(&[&args[..], &["--out", p(&both), "--metrics", p(&both_metrics)]].concat());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&both_metrics).unwrap()).unwrap();
    assert_eq!(m["config"]["train_source"], "both");
    assert_eq!(m["examples"], 10);
    let out = fablegen(&["train-qg", "--train-source", "external-only", "--out", p(&dir.path().join("y"))]);
    assert!(!out.status.success());

    let out = fablegen(&["train-qg", "--external-model", "t5-base", "--out", p(&dir.path().join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn rating_sheet_hides_the_system() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.jsonl");
    ok(&["run", "--split", "test", "--out", p(&pred)]);
    let sheet = dir.path().join("sheet.csv");
    let key = dir.path().join("key.csv");
    ok(&["export-rating-sheet", "--pred", p(&pred), "--seed", "7", "--out", p(&sheet), "--key", p(&key)]);
    let sheet_text = std::fs::read_to_string(&sheet).unwrap();
    let key_text = std::fs::read_to_string(&key).unwrap();
    assert!(!sheet_text.contains("three_stage"));
    assert!(key_text.contains("three_stage"));
    let rows = std::fs::read_to_string(&pred).unwrap().lines().count();
    assert_eq!(key_text.lines().count(), rows + 1);

    let again = dir.path().join("again.csv");
    ok(&["export-rating-sheet", "--pred", p(&pred), "--seed", "7", "--out", p(&again), "--key", p(&dir.path().join("k2.csv"))]);
    assert_eq!(sheet_text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn corpus_stats_reports_the_requested_split() {
    for (split, qa) in [("train", 9), ("validation", 6), ("test", 7)] {
        let v: Value = serde_json::from_str(&ok(&["corpus", "stats", "--split", split, "--format", "json"])).unwrap();
        assert_eq!(v["split"], split);
        assert_eq!(v["stats"]["qa_count"], qa);
        let total: u64 = v["categories"].as_object().unwrap().values().map(|c| c["count"].as_u64().unwrap()).sum();
        assert_eq!(total, qa);
    }
    let table = ok(&["corpus", "stats", "--split", "test"]);
    assert!(table.contains("causal_relationship"), "{table}");
}
