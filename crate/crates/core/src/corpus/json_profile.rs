use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, Corpus, CorpusError, NarrativeElement, Origin, QaPair, Section, Split, Story};

pub(super) const MANIFEST: &str = "manifest.json";
pub(super) const STORIES_DIR: &str = "stories";

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    splits: BTreeMap<Split, Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SectionRecord {
    index: u32,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRecord {
    pair_id: String,
    section_indices: Vec<u32>,
    question: String,
    answer: String,
    element: NarrativeElement,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    extra_elements: Vec<NarrativeElement>,
    #[serde(default = "ground_truth")]
    origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    system_tag: Option<String>,
}

fn ground_truth() -> Origin {
    Origin::GroundTruth
}

#[derive(Debug, Serialize, Deserialize)]
struct StoryFile {
    story_id: String,
    title: String,
    split: Split,
    sections: Vec<SectionRecord>,
    qa_pairs: Vec<PairRecord>,
}

impl From<StoryFile> for Story {
    fn from(file: StoryFile) -> Self {
        let id = file.story_id;
        Story {
            sections: file
                .sections
                .into_iter()
                .map(|s| Section { story_id: id.clone(), index: s.index, text: s.text })
                .collect(),
            qa_pairs: file
                .qa_pairs
                .into_iter()
                .map(|p| QaPair {
                    pair_id: p.pair_id,
                    story_id: id.clone(),
                    section_indices: p.section_indices,
                    question: p.question,
                    answer: p.answer,
                    element: p.element,
                    extra_elements: p.extra_elements,
                    origin: p.origin,
                    system_tag: p.system_tag,
                })
                .collect(),
            story_id: id,
            title: file.title,
            split: file.split,
        }
    }
}

impl From<&Story> for StoryFile {
    fn from(story: &Story) -> Self {
        StoryFile {
            story_id: story.story_id.clone(),
            title: story.title.clone(),
            split: story.split,
            sections: story
                .sections
                .iter()
                .map(|s| SectionRecord { index: s.index, text: s.text.clone() })
                .collect(),
            qa_pairs: story
                .qa_pairs
                .iter()
                .map(|p| PairRecord {
                    pair_id: p.pair_id.clone(),
                    section_indices: p.section_indices.clone(),
                    question: p.question.clone(),
                    answer: p.answer.clone(),
                    element: p.element,
                    extra_elements: p.extra_elements.clone(),
                    origin: p.origin,
                    system_tag: p.system_tag.clone(),
                })
                .collect(),
        }
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CorpusError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&raw).map_err(|e| CorpusError::Parse {
        file: path.to_path_buf(),
        record: format!("line {}", e.line()),
        message: e.to_string(),
    })
}

pub(super) fn read_story_file(path: &Path) -> Result<Story, CorpusError> {
    parse_json::<StoryFile>(path).map(Story::from)
}

pub(super) fn read_stories(root: &Path) -> Result<Vec<Story>, CorpusError> {
    let stories_dir = root.join(STORIES_DIR);
    if !stories_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&stories_dir)
        .map_err(io_err(&stories_dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let stories = paths.iter().map(|p| read_story_file(p)).collect::<Result<Vec<_>, _>>()?;

    let manifest_path = root.join(MANIFEST);
    if manifest_path.is_file() {
        let manifest: Manifest = parse_json(&manifest_path)?;
        let mut violations = Vec::new();
        let mut listed = BTreeMap::new();
        for (split, ids) in &manifest.splits {
            for id in ids {
                listed.insert(id.as_str(), *split);
            }
        }
        for story in &stories {
            match listed.remove(story.story_id.as_str()) {
                Some(split) if split != story.split => violations.push(format!(
                    "story {}: manifest lists split {split}, file says {}",
                    story.story_id, story.split
                )),
                None => violations.push(format!("story {}: missing from manifest", story.story_id)),
                _ => {}
            }
        }
        for id in listed.keys() {
            violations.push(format!("manifest lists story {id} with no story file"));
        }
        if !violations.is_empty() {
            return Err(CorpusError::Validation(violations));
        }
    }
    Ok(stories)
}

/// Writes the canonical layout: `manifest.json` and `stories/<id>.json`.
pub fn save_canonical(corpus: &Corpus, root: &Path) -> Result<(), CorpusError> {
    let stories_dir = root.join(STORIES_DIR);
    fs::create_dir_all(&stories_dir).map_err(io_err(&stories_dir))?;
    let mut manifest = Manifest::default();
    for story in corpus.stories() {
        manifest.splits.entry(story.split).or_default().push(story.story_id.clone());
        let path = stories_dir.join(format!("{}.json", story.story_id));
        let body = serde_json::to_string_pretty(&StoryFile::from(story)).expect("story serializes");
        fs::write(&path, body + "\n").map_err(io_err(&path))?;
    }
    let path = root.join(MANIFEST);
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, body + "\n").map_err(io_err(&path))
}
