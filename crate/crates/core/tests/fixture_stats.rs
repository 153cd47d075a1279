//! The bundled fixture corpus against its independently computed manifest.

mod common;

use fablegen_core::corpus::{category_distribution, compute_stats, Split, Summary};
use fablegen_core::qgen::{build_qg_training_pairs, Direction};
use fablegen_core::ranker::gold_inputs;
use serde_json::Value;

fn expected() -> Value {
    let raw = std::fs::read_to_string(common::repo_root().join("fixtures/corpus.expected.json")).unwrap();
    serde_json::from_str(&raw).unwrap()
}

fn assert_summary(split: Split, name: &str, got: Summary, want: &Value) {
    let field = |k: &str| want[k].as_f64().unwrap_or_else(|| panic!("{split} {name}.{k} missing"));
    for (k, g) in [("mean", got.mean), ("sd", got.sd), ("min", got.min), ("max", got.max)] {
        assert!((g - field(k)).abs() < 1e-9, "{split} {name}.{k}: got {g}, manifest {}", field(k));
    }
}

#[test]
fn every_split_matches_the_manifest() {
    let corpus = common::fixture_corpus();
    let manifest = expected();
    for split in Split::ALL {
        let want = &manifest[split.as_str()];
        let stats = compute_stats(&corpus, split).unwrap();
        assert_eq!(stats.book_count as u64, want["book_count"].as_u64().unwrap(), "{split} book_count");
        assert_eq!(stats.qa_count as u64, want["qa_count"].as_u64().unwrap(), "{split} qa_count");
        for (label, summary) in stats.rows() {
            let key = label.replace(' ', "_");
            assert_summary(split, &key, summary, &want["stats"][&key]);
        }
        let categories = category_distribution(&corpus, split).unwrap();
        for (element, share) in &categories {
            assert_eq!(share.count as u64, want["categories"][element.as_str()].as_u64().unwrap(), "{split} {element:?}");
        }
        let pairs = build_qg_training_pairs(&corpus, split, Direction::AnswerToQuestion);
        assert_eq!(pairs.len() as u64, want["qg_training_pairs"].as_u64().unwrap(), "{split} qg pairs");
        assert_eq!(gold_inputs(&corpus, split).len() as u64, want["ranking_positives"].as_u64().unwrap());
    }
}

#[test]
fn canonical_json_round_trips_the_fixture() {
    use fablegen_core::corpus::{load_corpus, save_canonical, FormatProfile};
    let corpus = common::fixture_corpus();
    let dir = tempfile::tempdir().unwrap();
    save_canonical(&corpus, dir.path()).unwrap();
    let reloaded = load_corpus(dir.path(), FormatProfile::CanonicalJson).unwrap();
    assert_eq!(reloaded, corpus);
}
