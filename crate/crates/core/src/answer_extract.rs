//! Heuristic answer extraction.
//!
//! Named entities and noun chunks become answers for the character, setting
//! and feeling elements; predicate frames rendered as subject-verb-object
//! events become answers for action, causal relationship, outcome resolution
//! and prediction.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{NarrativeElement, Section};
use crate::lingann::{
    annotate, lexicon, Annotation, AnnotationBackend, AnnotationError, CoarsePos, EntityLabel, PredicateFrame, Span,
};

use NarrativeElement::*;

pub const EVENT_ELEMENTS: [NarrativeElement; 4] = [Action, CausalRelationship, OutcomeResolution, Prediction];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Entity,
    NounChunk,
    SvoEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventRendering {
    /// subject + verb group + arguments
    Full,
    /// verb group + arguments, only emitted when the frame has a subject
    VerbPhrase,
}

/// Pieces of the source frame, kept so question templates can rephrase it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventParts {
    pub rendering: EventRendering,
    pub subject: Option<String>,
    pub verb_group: String,
    /// Base form of the first verb of the group.
    pub verb_lemma: String,
    /// Whether the first verb of the group is an auxiliary or modal.
    pub leading_aux: bool,
    /// Surface text after the verb group.
    pub complement: String,
}

/// Surrounding context for question templates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnswerContext {
    /// The frame subject, or the nearest nominal before the answer in its sentence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub past_tense: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_label: Option<EntityLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventParts>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAnswer {
    pub text: String,
    pub section_index: u32,
    pub source: AnswerSource,
    pub target_elements: BTreeSet<NarrativeElement>,
    pub provenance_spans: Vec<Span>,
    /// Token index where the answer starts.
    pub rank_hint: usize,
    #[serde(default)]
    pub context: AnswerContext,
}

impl CandidateAnswer {
    /// Whether two candidates share any source token.
    pub fn shares_provenance(&self, other: &CandidateAnswer) -> bool {
        self.section_index == other.section_index
            && self.provenance_spans.iter().any(|a| other.provenance_spans.iter().any(|b| a.overlaps(b)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionLimits {
    pub max_candidates_per_section: usize,
}

impl Default for ExtractionLimits {
    fn default() -> Self {
        Self { max_candidates_per_section: 32 }
    }
}

fn dedup_first(candidates: Vec<CandidateAnswer>) -> Vec<CandidateAnswer> {
    let mut seen = HashSet::new();
    candidates.into_iter().filter(|c| seen.insert(c.text.to_lowercase())).collect()
}

/// Drops trailing punctuation tokens from a span.
fn trim_punct(annotation: &Annotation, mut span: Span) -> Span {
    while span.end > span.start && annotation.tokens[span.end - 1].coarse_pos == CoarsePos::Punct {
        span.end -= 1;
    }
    span
}

fn sentence_past_tense(annotation: &Annotation, at: usize) -> bool {
    let Some(sentence) = annotation.sentence_of(at) else { return true };
    let verbs: Vec<usize> = (sentence.start..sentence.end)
        .filter(|&i| annotation.tokens[i].coarse_pos == CoarsePos::Verb)
        .collect();
    // nearest verb to the answer; narratives default to past
    verbs
        .iter()
        .min_by_key(|&&i| i.abs_diff(at))
        .map(|&i| lexicon::is_past_form(&annotation.tokens[i].text.to_lowercase()))
        .unwrap_or(true)
}

/// Subject of the frame covering `span`, else the closest entity or pronoun
/// ending before `span` in the same sentence.
fn context_subject(annotation: &Annotation, text: &str, span: Span) -> Option<String> {
    let from_frame = annotation
        .frames
        .iter()
        .filter(|f| f.extent().overlaps(&span))
        .filter_map(|f| f.subject())
        .find(|s| !s.span.overlaps(&span))
        .map(|s| annotation.surface(text, s.span).to_string());
    if from_frame.is_some() {
        return from_frame;
    }
    let sentence = annotation.sentence_of(span.start)?;
    let entity_before = annotation
        .entities
        .iter()
        .filter(|e| e.span.within(&sentence) && e.span.end <= span.start)
        .map(|e| e.span);
    let pronoun_before = (sentence.start..span.start)
        .filter(|&i| annotation.tokens[i].coarse_pos == CoarsePos::Pron)
        .map(|i| Span::new(i, i + 1));
    entity_before
        .chain(pronoun_before)
        .max_by_key(|s| s.end)
        .map(|s| annotation.surface(text, s).to_string())
}

/// One candidate per entity mention and per noun chunk, deduplicated
/// case-insensitively in document order (entities first at equal positions).
pub fn extract_entity_chunk_answers(annotation: &Annotation, text: &str, section_index: u32) -> Vec<CandidateAnswer> {
    let mut spans: Vec<(Span, AnswerSource, BTreeSet<NarrativeElement>, Option<EntityLabel>)> = Vec::new();
    for e in &annotation.entities {
        let targets = match e.label {
            EntityLabel::Person => BTreeSet::from([Character]),
            EntityLabel::Location | EntityLabel::Time => BTreeSet::from([Setting]),
            EntityLabel::Org | EntityLabel::Misc => BTreeSet::from([Character, Setting]),
        };
        spans.push((e.span, AnswerSource::Entity, targets, Some(e.label)));
    }
    for c in &annotation.chunks {
        let head = annotation.tokens[c.head].text.to_lowercase();
        let targets = if lexicon::is_emotion_word(&head) {
            BTreeSet::from([Feeling])
        } else {
            BTreeSet::from([Character, Setting])
        };
        spans.push((c.span, AnswerSource::NounChunk, targets, None));
    }
    spans.sort_by_key(|(span, source, _, _)| (span.start, *source, span.end));

    let candidates = spans
        .into_iter()
        .map(|(span, source, target_elements, entity_label)| CandidateAnswer {
            text: annotation.surface(text, span).to_string(),
            section_index,
            source,
            target_elements,
            provenance_spans: vec![span],
            rank_hint: span.start,
            context: AnswerContext {
                subject: context_subject(annotation, text, span),
                past_tense: sentence_past_tense(annotation, span.start),
                entity_label,
                event: None,
            },
        })
        .filter(|c| !c.text.trim().is_empty())
        .collect();
    dedup_first(candidates)
}

fn event_parts(annotation: &Annotation, text: &str, frame: &PredicateFrame, extent: Span, rendering: EventRendering) -> EventParts {
    let group = frame.verb_group();
    let first = annotation.tokens[group.start].text.to_lowercase();
    let complement = if group.end < extent.end {
        annotation.surface(text, Span::new(group.end, extent.end)).to_string()
    } else {
        String::new()
    };
    EventParts {
        rendering,
        subject: frame.subject().map(|s| annotation.surface(text, s.span).to_string()),
        verb_group: annotation.surface(text, group).to_string(),
        verb_lemma: lexicon::verb_lemma(&first),
        leading_aux: lexicon::lookup(&first).is_some_and(|e| e.aux),
        complement,
    }
}

/// Event answers: for each frame the full subject-verb-object rendering and,
/// when a subject exists, the verb-phrase rendering without it.
pub fn extract_event_answers(annotation: &Annotation, text: &str, section_index: u32) -> Vec<CandidateAnswer> {
    let mut out = Vec::new();
    for frame in &annotation.frames {
        let extent = trim_punct(annotation, frame.extent());
        if extent.is_empty() {
            continue;
        }
        let past_tense = lexicon::is_past_form(&annotation.tokens[frame.verb_group().start].text.to_lowercase());
        let subject_text = frame.subject().map(|s| annotation.surface(text, s.span).to_string());
        let context_subject = subject_text.clone().or_else(|| context_subject(annotation, text, extent));
        let mut renderings = vec![(extent, EventRendering::Full)];
        if frame.subject().is_some() {
            let vp = Span::new(frame.verb_group().start, extent.end);
            renderings.push((vp, EventRendering::VerbPhrase));
        }
        for (span, rendering) in renderings {
            out.push(CandidateAnswer {
                text: annotation.surface(text, span).to_string(),
                section_index,
                source: AnswerSource::SvoEvent,
                target_elements: EVENT_ELEMENTS.into_iter().collect(),
                provenance_spans: vec![span],
                rank_hint: span.start,
                context: AnswerContext {
                    subject: context_subject.clone(),
                    past_tense,
                    entity_label: None,
                    event: Some(event_parts(annotation, text, frame, extent, rendering)),
                },
            });
        }
    }
    dedup_first(out)
}

/// Merges both extractors over an already annotated section. On equal text
/// the event answer wins because it serves four elements.
pub fn merge_candidates(
    annotation: &Annotation,
    text: &str,
    section_index: u32,
    limits: ExtractionLimits,
) -> Vec<CandidateAnswer> {
    let events = extract_event_answers(annotation, text, section_index);
    let event_texts: HashSet<String> = events.iter().map(|c| c.text.to_lowercase()).collect();
    let mut all: Vec<CandidateAnswer> = extract_entity_chunk_answers(annotation, text, section_index)
        .into_iter()
        .filter(|c| !event_texts.contains(&c.text.to_lowercase()))
        .chain(events)
        .collect();
    all.sort_by(|a, b| {
        (a.rank_hint, a.source, &a.text).cmp(&(b.rank_hint, b.source, &b.text))
    });
    all.truncate(limits.max_candidates_per_section);
    all
}

pub fn extract_candidate_answers(
    section: &Section,
    backend: &dyn AnnotationBackend,
    limits: ExtractionLimits,
) -> Result<Vec<CandidateAnswer>, AnnotationError> {
    let annotation = annotate(&section.text, backend)?;
    Ok(merge_candidates(&annotation, &section.text, section.index, limits))
}
