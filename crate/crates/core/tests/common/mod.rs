//! Shared helpers for integration tests.

use std::path::{Path, PathBuf};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture_corpus() -> fablegen_core::corpus::Corpus {
    fablegen_core::corpus::load_corpus(
        &repo_root().join("fixtures/corpus"),
        fablegen_core::corpus::FormatProfile::CanonicalJson,
    )
    .expect("fixture corpus loads")
}

/// Compares `actual` with the committed golden file. With
/// `FABLEGEN_RECORD=1` the file is (re)written instead.
#[allow(dead_code)]
pub fn check_golden(path: &Path, actual: &str) {
    if std::env::var("FABLEGEN_RECORD").is_ok_and(|v| v == "1") {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("missing golden {} ({e}); run with FABLEGEN_RECORD=1", path.display()));
    if expected != actual {
        let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b);
        panic!(
            "golden mismatch in {} at line {:?}\nexpected: {:?}\nactual:   {:?}",
            path.display(),
            line.map(|l| l + 1),
            line.and_then(|l| expected.lines().nth(l)),
            line.and_then(|l| actual.lines().nth(l)),
        );
    }
}
