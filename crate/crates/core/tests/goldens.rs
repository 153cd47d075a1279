//! Byte-stable golden files for the reference annotator and the candidate
//! extractor. Record with `FABLEGEN_RECORD=1`.

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use fablegen_core::answer_extract::{extract_candidate_answers, ExtractionLimits};
use fablegen_core::corpus::{NarrativeElement, SectionKey};
use fablegen_core::lingann::{annotate, ReferenceAnnotator};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Sections with committed candidate lists.
const CANDIDATE_SECTIONS: [(&str, u32); 5] = [
    ("maie-and-the-cow", 2),
    ("maie-and-the-cow", 3),
    ("the-haunted-house", 1),
    ("ali-baba", 1),
    ("ali-baba", 2),
];

#[test]
fn annotation_goldens() {
    let corpus = common::fixture_corpus();
    let table_text = corpus.section(&SectionKey::new("maie-and-the-cow", 2)).unwrap().text.clone();
    let coverage_text = corpus.section(&SectionKey::new("the-haunted-house", 1)).unwrap().text.clone();
    let cases = [
        ("maie-sighed", "Maie sighed.".to_string()),
        ("ali-baba-goes", "Ali Baba goes to the cave.".to_string()),
        ("maie-section-2", table_text),
        ("haunted-house-section-1", coverage_text),
    ];
    for (name, text) in cases {
        let annotation = annotate(&text, &ReferenceAnnotator::new()).unwrap();
        let json = serde_json::to_string_pretty(&annotation).unwrap() + "\n";
        common::check_golden(&golden_dir().join(format!("{name}.ann.json")), &json);
    }
}

#[test]
fn candidate_goldens() {
    let corpus = common::fixture_corpus();
    for (story, index) in CANDIDATE_SECTIONS {
        let section = corpus.section(&SectionKey::new(story, index)).unwrap();
        let first = extract_candidate_answers(section, &ReferenceAnnotator::new(), ExtractionLimits::default()).unwrap();
        let second = extract_candidate_answers(section, &ReferenceAnnotator::new(), ExtractionLimits::default()).unwrap();
        let json = serde_json::to_string_pretty(&first).unwrap() + "\n";
        assert_eq!(json, serde_json::to_string_pretty(&second).unwrap() + "\n", "{story}#{index} not deterministic");
        common::check_golden(&golden_dir().join(format!("candidates/{story}-{index}.json")), &json);
    }
}

#[test]
fn table_section_offers_both_reference_answers() {
    let corpus = common::fixture_corpus();
    let section = corpus.section(&SectionKey::new("maie-and-the-cow", 2)).unwrap();
    let c = extract_candidate_answers(section, &ReferenceAnnotator::new(), ExtractionLimits::default()).unwrap();
    let texts: Vec<&str> = c.iter().map(|c| c.text.as_str()).collect();
    assert!(texts.contains(&"a junket"), "{texts:?}");
    assert!(texts.contains(&"wanted to get something to eat"), "{texts:?}");
}

#[test]
fn coverage_section_reaches_all_seven_elements() {
    let corpus = common::fixture_corpus();
    let section = corpus.section(&SectionKey::new("the-haunted-house", 1)).unwrap();
    let c = extract_candidate_answers(section, &ReferenceAnnotator::new(), ExtractionLimits::default()).unwrap();
    let union: BTreeSet<NarrativeElement> = c.iter().flat_map(|c| c.target_elements.iter().copied()).collect();
    assert_eq!(union, NarrativeElement::ALL.into_iter().collect());
}

#[test]
fn overlap_answers_on_the_table_section() {
    use fablegen_core::qgen::{generate_answer, GenerationConfig, TemplateBackend};
    let corpus = common::fixture_corpus();
    let text = &corpus.section(&SectionKey::new("maie-and-the-cow", 2)).unwrap().text;
    let (b, c) = (TemplateBackend::new(), GenerationConfig::default());
    // Content words {three, young, men, ask}: only the first sentence
    // overlaps (3). Its longest chunks are "three young men" and "the little
    // hut" (3 tokens each); the earlier wins. No sentence contains "ask".
    assert_eq!(generate_answer(text, "What did the three young men ask for?", &b, &c).unwrap(), "three young men");
    // {cried, junket} both occur only in the third sentence, whose longest
    // chunks are "a junket" and "good mother" (2 tokens each).
    assert_eq!(generate_answer(text, "Who cried for a junket?", &b, &c).unwrap(), "a junket");
}
