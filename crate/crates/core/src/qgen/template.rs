use std::collections::HashSet;
use std::sync::Arc;

use super::{GenerationConfig, QgBackend, QgRequest};
use crate::answer_extract::{merge_candidates, AnswerSource, CandidateAnswer, EventParts, EventRendering, ExtractionLimits};
use crate::corpus::NarrativeElement;
use crate::eval::tokenize_for_rouge;
use crate::lingann::{annotate, lexicon, Annotation, AnnotationBackend, CoarsePos, EntityLabel, ReferenceAnnotator, Span};

/// Rows of the template table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateKind {
    WhoIs,
    WhereIs,
    WhenIs,
    WhatIs,
    HowFeel,
    WhatDo,
    Why,
    WhatHappenedAfter,
    WhatWillHappenAfter,
}

/// Templates cycled through for full subject-verb-object events.
const EVENT_CYCLE: [TemplateKind; 3] = [TemplateKind::Why, TemplateKind::WhatHappenedAfter, TemplateKind::WhatWillHappenAfter];

pub fn template_kind(c: &CandidateAnswer) -> TemplateKind {
    match (c.source, &c.context.event) {
        (AnswerSource::SvoEvent, Some(e)) if e.rendering == EventRendering::VerbPhrase => TemplateKind::WhatDo,
        (AnswerSource::SvoEvent, _) => EVENT_CYCLE[c.rank_hint % EVENT_CYCLE.len()],
        (AnswerSource::Entity, _) => match c.context.entity_label {
            Some(EntityLabel::Person) => TemplateKind::WhoIs,
            Some(EntityLabel::Location) => TemplateKind::WhereIs,
            Some(EntityLabel::Time) => TemplateKind::WhenIs,
            _ => TemplateKind::WhatIs,
        },
        (AnswerSource::NounChunk, _) if c.target_elements.contains(&NarrativeElement::Feeling) => TemplateKind::HowFeel,
        (AnswerSource::NounChunk, _) => TemplateKind::WhatIs,
    }
}

/// Lowercases a leading pronoun or determiner so the phrase reads well
/// mid-question ("She" -> "she", "The captain" -> "the captain").
fn mid_sentence(phrase: &str) -> String {
    let phrase = phrase.trim();
    let (first, rest) = phrase.split_once(' ').unwrap_or((phrase, ""));
    let lower = first.to_lowercase();
    let demote = first != "I"
        && (lower == "there" || lexicon::lookup(&lower).is_some_and(|e| matches!(e.pos, CoarsePos::Pron | CoarsePos::Det)));
    match (demote, rest.is_empty()) {
        (false, _) => phrase.to_string(),
        (true, true) => lower,
        (true, false) => format!("{lower} {rest}"),
    }
}

/// Whether a phrase ends in a plural common noun.
fn is_plural(phrase: &str) -> bool {
    let Some(last) = phrase.split_whitespace().last() else { return false };
    if last.chars().next().is_some_and(char::is_uppercase) {
        return false;
    }
    let lower = last.to_lowercase();
    match lexicon::lookup(&lower) {
        Some(e) => e.pos == CoarsePos::Noun && e.lemma != lower,
        None => lower.len() > 3 && lower.ends_with('s') && !lower.ends_with("ss") && !lower.ends_with("us"),
    }
}

fn subject_phrase(subject: Option<&str>) -> String {
    match subject.map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => mid_sentence(s),
        None => "the character".to_string(),
    }
}

fn do_form(subject: &str, past: bool) -> &'static str {
    if past {
        "did"
    } else if matches!(subject, "they" | "we" | "you" | "I") {
        "do"
    } else {
        "does"
    }
}

fn join_words(parts: &[&str]) -> String {
    parts.iter().flat_map(|p| p.split_whitespace()).collect::<Vec<_>>().join(" ")
}

fn why_question(e: &EventParts, subject: &str, past: bool) -> String {
    let mut group = e.verb_group.split_whitespace();
    let first = group.next().unwrap_or_default();
    let rest: Vec<&str> = group.collect();
    if e.leading_aux {
        format!("Why {} {}", first.to_lowercase(), join_words(&[subject, &rest.join(" "), &e.complement]))
    } else {
        format!("Why {} {}", do_form(subject, past), join_words(&[subject, &e.verb_lemma, &rest.join(" "), &e.complement]))
    }
}

/// The question the template table assigns to a candidate answer.
pub fn template_question(c: &CandidateAnswer) -> String {
    let past = c.context.past_tense;
    let x = &mid_sentence(&c.text);
    let be = match (past, is_plural(x)) {
        (true, false) => "was",
        (true, true) => "were",
        (false, false) => "is",
        (false, true) => "are",
    };
    let subject = subject_phrase(c.context.subject.as_deref());
    let event = c.context.event.as_ref();
    let clause = |e: &EventParts| join_words(&[&subject, &e.verb_group, &e.complement]);
    let q = match template_kind(c) {
        TemplateKind::WhoIs => format!("Who is {x}"),
        TemplateKind::WhereIs => format!("Where {be} {x}"),
        TemplateKind::WhenIs => format!("When {be} {x}"),
        TemplateKind::WhatIs => format!("What {be} {x}"),
        TemplateKind::HowFeel => format!("How {} {subject} feel", do_form(&subject, past)),
        TemplateKind::WhatDo => format!("What {} {subject} do", do_form(&subject, past)),
        TemplateKind::Why => match event {
            Some(e) => why_question(e, &subject, past),
            None => format!("Why {x}"),
        },
        TemplateKind::WhatHappenedAfter => {
            let verb = if past { "happened" } else { "happens" };
            format!("What {verb} after {}", event.map(clause).unwrap_or_else(|| x.to_string()))
        }
        TemplateKind::WhatWillHappenAfter => {
            format!("What will happen after {}", event.map(clause).unwrap_or_else(|| x.to_string()))
        }
    };
    format!("{q}?")
}

const WH_WORDS: &[&str] = &["who", "whom", "whose", "what", "which", "where", "when", "why", "how"];

/// Content words of a question plus their verb lemmas.
fn question_terms(question: &str) -> HashSet<String> {
    tokenize_for_rouge(question)
        .into_iter()
        .filter(|t| !lexicon::is_function_word(t) && !WH_WORDS.contains(&t.as_str()))
        .flat_map(|t| [lexicon::verb_lemma(&t), t])
        .collect()
}

fn is_content(pos: CoarsePos) -> bool {
    !matches!(pos, CoarsePos::Punct | CoarsePos::Det | CoarsePos::Pron | CoarsePos::Adp | CoarsePos::Other)
}

/// Longest noun chunk (earliest on ties) of the sentence sharing the most
/// content words with the question (earliest on ties). With no overlap
/// anywhere the whole section is searched. Falls back to entities, then
/// to the chosen sentence itself.
pub fn overlap_answer(annotation: &Annotation, text: &str, question: &str) -> String {
    let terms = question_terms(question);
    let overlap = |s: &Span| {
        (s.start..s.end)
            .filter(|&i| {
                let t = &annotation.tokens[i];
                let lower = t.text.to_lowercase();
                is_content(t.coarse_pos) && !lexicon::is_function_word(&lower) && (terms.contains(&lower) || terms.contains(&t.lemma))
            })
            .count()
    };
    let mut best: Option<(usize, Span)> = None;
    for s in &annotation.sentences {
        let o = overlap(s);
        if best.is_none_or(|(b, _)| o > b) {
            best = Some((o, *s));
        }
    }
    let Some((score, sentence)) = best else { return String::new() };
    let scope = if score == 0 { Span::new(0, annotation.tokens.len()) } else { sentence };

    let longest = |spans: Vec<Span>| spans.into_iter().filter(|s| s.within(&scope)).min_by_key(|s| (std::cmp::Reverse(s.len()), s.start));
    longest(annotation.chunks.iter().map(|c| c.span).collect())
        .or_else(|| longest(annotation.entities.iter().map(|e| e.span).collect()))
        .map(|s| annotation.surface(text, s).to_string())
        .unwrap_or_else(|| {
            let mut s = sentence;
            while s.end > s.start && annotation.tokens[s.end - 1].coarse_pos == CoarsePos::Punct {
                s.end -= 1;
            }
            annotation.surface(text, s).to_string()
        })
}

/// Rule-based backend: questions from the template table, answers by the
/// question-overlap rule, question-first output as one question per sentence.
#[derive(Clone)]
pub struct TemplateBackend {
    annotator: Arc<dyn AnnotationBackend>,
}

impl Default for TemplateBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl TemplateBackend {
    pub const ID: &'static str = "template";

    pub fn new() -> Self {
        Self { annotator: Arc::new(ReferenceAnnotator::new()) }
    }

    pub fn with_annotator(annotator: Arc<dyn AnnotationBackend>) -> Self {
        Self { annotator }
    }

    fn annotate(&self, text: &str) -> Result<Annotation, String> {
        annotate(text, self.annotator.as_ref()).map_err(|e| e.to_string())
    }
}

impl QgBackend for TemplateBackend {
    fn id(&self) -> &str {
        Self::ID
    }

    fn question(&self, request: &QgRequest, _config: &GenerationConfig) -> Result<String, String> {
        match &request.hint {
            Some(c) => Ok(template_question(c)),
            None => Ok(format!("What is {}?", request.answer_text.trim())),
        }
    }

    fn answer(&self, section_text: &str, question: &str, _config: &GenerationConfig) -> Result<String, String> {
        let annotation = self.annotate(section_text)?;
        Ok(overlap_answer(&annotation, section_text, question))
    }

    /// Per sentence: the first full event candidate starting in it, else its
    /// first candidate of any kind, else a question quoting the sentence.
    fn questions_first(&self, section_text: &str, limit: usize, _config: &GenerationConfig) -> Result<Vec<String>, String> {
        let annotation = self.annotate(section_text)?;
        let candidates = merge_candidates(&annotation, section_text, 0, ExtractionLimits { max_candidates_per_section: usize::MAX });
        let questions = annotation
            .sentences
            .iter()
            .take(limit)
            .map(|s| {
                let inside: Vec<&CandidateAnswer> = candidates.iter().filter(|c| s.contains(c.rank_hint)).collect();
                let full_event = inside
                    .iter()
                    .find(|c| c.context.event.as_ref().is_some_and(|e| e.rendering == EventRendering::Full));
                match full_event.or(inside.first()) {
                    Some(c) => template_question(c),
                    None => format!("What does \"{}\" tell us?", annotation.surface(section_text, *s)),
                }
            })
            .collect();
        Ok(questions)
    }
}
