//! Reader for the released per-book CSV layout.
//!
//! Each book contributes `<book>-story.csv` (columns `section`, `text`) and
//! `<book>-questions.csv` (columns `question_id`, `cor_section`, `attribute1`,
//! optional `attribute2`, `question`, `answer1`). The split is taken from the
//! nearest ancestor directory named after a split.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{io_err, CorpusError, NarrativeElement, Origin, QaPair, Section, Split, Story};

const STORY_SUFFIX: &str = "-story.csv";
const QUESTIONS_SUFFIX: &str = "-questions.csv";

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path.to_string_lossy().ends_with(".csv") {
            out.push(path);
        }
    }
    Ok(())
}

fn split_of(path: &Path, root: &Path) -> Option<Split> {
    path.strip_prefix(root)
        .ok()?
        .ancestors()
        .filter_map(|a| a.file_name())
        .find_map(|name| name.to_str()?.parse::<Split>().ok())
}

fn parse_err(file: &Path, record: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { file: file.to_path_buf(), record: format!("record {record}"), message: message.into() }
}

type Rows = Vec<BTreeMap<String, String>>;

fn read_rows(path: &Path) -> Result<Rows, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| parse_err(path, 0, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, 0, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        rows.push(headers.iter().cloned().zip(record.iter().map(str::to_string)).collect());
    }
    Ok(rows)
}

fn field<'a>(row: &'a BTreeMap<String, String>, name: &str, file: &Path, record: usize) -> Result<&'a str, CorpusError> {
    row.get(name)
        .map(String::as_str)
        .ok_or_else(|| parse_err(file, record, format!("missing column `{name}`")))
}

fn parse_indices(raw: &str, file: &Path, record: usize) -> Result<Vec<u32>, CorpusError> {
    raw.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u32>().map_err(|_| parse_err(file, record, format!("bad section index `{s}`"))))
        .collect()
}

fn read_book(story_path: &Path, questions: Option<&Path>, book: &str, split: Split) -> Result<Story, CorpusError> {
    let mut sections = Vec::new();
    for (i, row) in read_rows(story_path)?.iter().enumerate() {
        let record = i + 1;
        let index = field(row, "section", story_path, record)?
            .trim()
            .parse::<u32>()
            .map_err(|_| parse_err(story_path, record, "section is not a positive integer"))?;
        let text = field(row, "text", story_path, record)?.to_string();
        sections.push(Section { story_id: book.to_string(), index, text });
    }
    sections.sort_by_key(|s| s.index);

    let mut qa_pairs = Vec::new();
    if let Some(qpath) = questions {
        for (i, row) in read_rows(qpath)?.iter().enumerate() {
            let record = i + 1;
            let qid = field(row, "question_id", qpath, record)?;
            let label = field(row, "attribute1", qpath, record)?;
            let element = label.parse::<NarrativeElement>().map_err(|e| parse_err(qpath, record, e.to_string()))?;
            let extra_elements = match row.get("attribute2").map(|s| s.trim()) {
                Some(extra) if !extra.is_empty() => {
                    vec![extra.parse::<NarrativeElement>().map_err(|e| parse_err(qpath, record, e.to_string()))?]
                }
                _ => vec![],
            };
            qa_pairs.push(QaPair {
                pair_id: format!("{book}-{}", qid.trim()),
                story_id: book.to_string(),
                section_indices: parse_indices(field(row, "cor_section", qpath, record)?, qpath, record)?,
                question: field(row, "question", qpath, record)?.trim().to_string(),
                answer: field(row, "answer1", qpath, record)?.trim().to_string(),
                element,
                extra_elements,
                origin: Origin::GroundTruth,
                system_tag: None,
            });
        }
    }
    Ok(Story {
        story_id: book.to_string(),
        title: book.replace(['-', '_'], " "),
        split,
        sections,
        qa_pairs,
    })
}

pub(super) fn read_stories(root: &Path) -> Result<Vec<Story>, CorpusError> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    files.sort();
    let mut question_files: BTreeMap<String, PathBuf> = BTreeMap::new();
    for f in &files {
        if let Some(book) = f.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(QUESTIONS_SUFFIX)) {
            question_files.insert(book.to_string(), f.clone());
        }
    }
    let mut stories = Vec::new();
    for f in &files {
        let Some(book) = f.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(STORY_SUFFIX)) else {
            continue;
        };
        let split = split_of(f, root).ok_or_else(|| parse_err(f, 0, "cannot infer split from directory names"))?;
        stories.push(read_book(f, question_files.get(book).map(PathBuf::as_path), book, split)?);
    }
    Ok(stories)
}

#[cfg(test)]
mod tests {
    use super::super::{load_corpus, FormatProfile};
    use super::*;

    #[test]
    fn reads_released_layout() {
        let dir = tempfile::tempdir().unwrap();
        let val = dir.path().join("section-stories").join("val");
        let qdir = dir.path().join("questions").join("val");
        fs::create_dir_all(&val).unwrap();
        fs::create_dir_all(&qdir).unwrap();
        fs::write(val.join("the-cow-story.csv"), "section,text\n1,\"Maie sighed.\"\n2,\"they were students, on a boat.\"\n").unwrap();
        fs::write(
            qdir.join("the-cow-questions.csv"),
            "question_id,cor_section,attribute1,attribute2,question,answer1\n\
             0,2,causal relationship,,Why were they on a boat?,They were students.\n\
             1,\"1,2\",feeling,action,How did Maie feel?,sad\n",
        )
        .unwrap();
        let corpus = load_corpus(dir.path(), FormatProfile::CsvPerBook).unwrap();
        let story = corpus.story("the-cow").unwrap();
        assert_eq!(story.split, Split::Validation);
        assert_eq!(story.sections.len(), 2);
        assert_eq!(story.qa_pairs[1].section_indices, vec![1, 2]);
        assert_eq!(story.qa_pairs[1].extra_elements, vec![NarrativeElement::Action]);
        assert_eq!(story.qa_pairs[0].element, NarrativeElement::CausalRelationship);
    }

    #[test]
    fn bad_label_names_record() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train");
        fs::create_dir_all(&train).unwrap();
        fs::write(train.join("b-story.csv"), "section,text\n1,a\n2,b\n").unwrap();
        fs::write(train.join("b-questions.csv"), "question_id,cor_section,attribute1,question,answer1\n7,1,theme,Q?,A\n").unwrap();
        let err = load_corpus(dir.path(), FormatProfile::CsvPerBook).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("b-questions.csv") && msg.contains("record 1") && msg.contains("theme"), "{msg}");
    }
}
