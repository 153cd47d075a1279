//! Deterministic rule-based annotator.
//!
//! Rules, in order:
//!
//! 1. **Tokens**: runs of alphanumerics, allowing an inner `'`/`’`/`-` between
//!    two alphanumerics ("don't", "snow-man"); every other non-space character
//!    is a one-character punctuation token.
//! 2. **Sentences** end after a run of `.`, `!` or `?` plus any quote marks
//!    that immediately follow, whether or not whitespace comes next.
//! 3. **Part of speech**: lexicon lookup on the lowercase form, else suffix
//!    rules (`-ly` adverb; `-ing`/`-ed` verb; `-ous -ful -ive -able -ible -less
//!    -ish` adjective; otherwise noun). Capitalised words are proper nouns
//!    mid-sentence; sentence-initially only when unknown to the lexicon and
//!    not suffix-marked as adverb/verb/adjective, or when the same word also
//!    appears capitalised mid-sentence. Context fixes: `her`/`that` before a
//!    noun or adjective become determiners; a suffix-derived `-ing` word
//!    between a determiner/adjective and a noun becomes an adjective; an
//!    unknown `-s` noun (not `-ss`, length 4+) directly after a proper noun or
//!    `he`/`she`/`it`, or after `and` when the sentence already has an `-s`
//!    verb, becomes a verb. A capitalised word right after an opening quote
//!    counts as sentence-initial.
//! 4. **Entities** are maximal proper-noun runs, labelled location/time/org by
//!    head-word lists and person otherwise.
//! 5. **Noun chunks**: optional determiner, any adjectives or numbers, then a
//!    run of nouns/proper nouns; the head is the last noun.
//! 6. **Frames**: each verb group (verbs joined by adverbs that lead to another
//!    verb, or by infinitival `to`) yields one frame whose trigger is the last
//!    verb. The subject is the nearest nominal (entity, chunk or pronoun)
//!    ending before the group and not governed by a preposition, scanning
//!    back no further than punctuation, a conjunction or another verb.
//!    Existential `there` right before the group is the subject. A relative
//!    pronoun subject (`which`, `who`, `whom`, `that`) is replaced by the
//!    nominal ending right before it, across at most one comma. Arguments
//!    after the group: adverbs are skipped, a preposition turns the next
//!    nominal into a modifier, a second directly adjacent nominal (other than
//!    a relative pronoun) is a second object, and a trailing `to` + verb is
//!    kept as a modifier. After `be`, `feel`, `look`, `seem` or `become`, a
//!    run of adjectives is the object.

use std::collections::HashSet;

use super::lexicon::{self, regular_verb_lemma};
use super::{
    Annotation, AnnotationBackend, Argument, ArgumentRole, CoarsePos, EntityLabel, EntityMention, NounChunk,
    PredicateFrame, Span, Token,
};

const LOCATION_HEADS: &[&str] = &[
    "village", "castle", "forest", "wood", "woods", "mountain", "mountains", "river", "lake", "sea", "ocean",
    "kingdom", "city", "town", "island", "palace", "cave", "hill", "hills", "valley", "land", "garden", "street",
    "road", "bridge", "tower", "country", "desert", "bay", "harbour", "harbor", "field", "fields", "meadow",
    "church", "abbey", "mill", "farm", "lane",
];
const TIME_WORDS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
    "december", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "christmas", "easter",
    "midsummer", "yule",
];
const ORG_HEADS: &[&str] = &["company", "guild", "council", "army", "navy", "court", "bank", "school", "society"];
const QUOTES: &[char] = &['\'', '"', '\u{2019}', '\u{201D}', '\u{00BB}'];

#[derive(Debug, Default, Clone)]
pub struct ReferenceAnnotator;

impl ReferenceAnnotator {
    pub const ID: &'static str = "reference";

    pub fn new() -> Self {
        Self
    }
}

impl AnnotationBackend for ReferenceAnnotator {
    fn id(&self) -> &str {
        Self::ID
    }

    fn annotate_text(&self, text: &str) -> Result<Annotation, String> {
        Ok(annotate_reference(text))
    }
}

fn is_inner_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

struct RawToken {
    text: String,
    start: usize,
    end: usize,
    word: bool,
}

fn tokenize(text: &str) -> Vec<RawToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let start = i;
            i += 1;
            while i < chars.len() {
                if chars[i].is_alphanumeric() {
                    i += 1;
                } else if is_inner_joiner(chars[i]) && i + 1 < chars.len() && chars[i + 1].is_alphanumeric() {
                    i += 2;
                } else {
                    break;
                }
            }
            out.push(RawToken { text: chars[start..i].iter().collect(), start, end: i, word: true });
        } else {
            out.push(RawToken { text: c.to_string(), start: i, end: i + 1, word: false });
            i += 1;
        }
    }
    out
}

fn split_sentences(tokens: &[RawToken]) -> Vec<Span> {
    let is_terminal = |t: &RawToken| matches!(t.text.as_str(), "." | "!" | "?");
    let is_quote = |t: &RawToken| t.text.chars().next().is_some_and(|c| QUOTES.contains(&c)) && t.text.chars().count() == 1;
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < tokens.len() {
        if is_terminal(&tokens[i]) {
            let mut end = i + 1;
            while end < tokens.len() && is_terminal(&tokens[end]) {
                end += 1;
            }
            while end < tokens.len() && is_quote(&tokens[end]) {
                end += 1;
            }
            sentences.push(Span::new(start, end));
            start = end;
            i = end;
        } else {
            i += 1;
        }
    }
    if start < tokens.len() {
        sentences.push(Span::new(start, tokens.len()));
    }
    sentences
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Suffix class for words missing from the lexicon, with a lemma.
fn suffix_class(lower: &str) -> (CoarsePos, String) {
    const ADJ_SUFFIXES: &[&str] = &["ous", "ful", "ive", "able", "ible", "less", "ish"];
    if lower.chars().all(|c| c.is_ascii_digit()) {
        return (CoarsePos::Num, lower.to_string());
    }
    if lower.len() > 3 && lower.ends_with("ly") {
        return (CoarsePos::Adv, lower.to_string());
    }
    if (lower.len() > 4 && lower.ends_with("ing")) || (lower.len() > 3 && lower.ends_with("ed")) {
        return (CoarsePos::Verb, regular_verb_lemma(lower));
    }
    if ADJ_SUFFIXES.iter().any(|s| lower.len() > s.len() + 2 && lower.ends_with(s)) {
        return (CoarsePos::Adj, lower.to_string());
    }
    (CoarsePos::Noun, noun_lemma(lower))
}

fn noun_lemma(lower: &str) -> String {
    if lower.len() > 3 && lower.ends_with('s') && !lower.ends_with("ss") && !lower.ends_with("us") && !lower.ends_with("is") {
        if let Some(stem) = lower.strip_suffix("ies") {
            return format!("{stem}y");
        }
        return lower[..lower.len() - 1].to_string();
    }
    lower.to_string()
}

struct Tagged {
    pos: CoarsePos,
    lemma: String,
    from_suffix: bool,
}

fn tag(tokens: &[RawToken], sentences: &[Span]) -> Vec<Tagged> {
    let is_quote = |t: &RawToken| matches!(t.text.as_str(), "'" | "\"" | "\u{2018}" | "\u{201C}");
    let quote_initial = (1..tokens.len()).filter(|&i| {
        tokens[i].word && is_quote(&tokens[i - 1]) && (i < 2 || !tokens[i - 2].word)
    });
    let sentence_initial: HashSet<usize> = sentences
        .iter()
        .filter_map(|s| (s.start..s.end).find(|&i| tokens[i].word))
        .chain(quote_initial)
        .collect();
    let capitalized_mid: HashSet<&str> = tokens
        .iter()
        .enumerate()
        .filter(|(i, t)| t.word && !sentence_initial.contains(i) && is_capitalized(&t.text))
        .map(|(_, t)| t.text.as_str())
        .collect();

    let mut tags: Vec<Tagged> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if !t.word {
                return Tagged { pos: CoarsePos::Punct, lemma: t.text.clone(), from_suffix: false };
            }
            let lower = t.text.to_lowercase();
            let entry = lexicon::lookup(&lower);
            if is_capitalized(&t.text) && lower != "i" {
                let initial = sentence_initial.contains(&i);
                let propn = Tagged { pos: CoarsePos::Propn, lemma: t.text.clone(), from_suffix: false };
                if !initial || capitalized_mid.contains(t.text.as_str()) {
                    return propn;
                }
                if entry.is_none() {
                    let (pos, lemma) = suffix_class(&lower);
                    return match pos {
                        CoarsePos::Noun => propn,
                        _ => Tagged { pos, lemma, from_suffix: true },
                    };
                }
            }
            match entry {
                Some(e) => Tagged { pos: e.pos, lemma: e.lemma.clone(), from_suffix: false },
                None => {
                    let (pos, lemma) = suffix_class(&lower);
                    Tagged { pos, lemma, from_suffix: true }
                }
            }
        })
        .collect();

    // Contextual repairs, left to right, looking only at the original tags
    // of neighbours so the result does not depend on repair order.
    let original: Vec<CoarsePos> = tags.iter().map(|t| t.pos).collect();
    for i in 0..tokens.len() {
        let next = original.get(i + 1).copied();
        let prev = i.checked_sub(1).map(|p| original[p]);
        let lower = tokens[i].text.to_lowercase();
        let next_is_nominal_start =
            matches!(next, Some(CoarsePos::Noun | CoarsePos::Propn | CoarsePos::Adj | CoarsePos::Num));
        if (lower == "her" || lower == "that") && next_is_nominal_start {
            tags[i].pos = CoarsePos::Det;
        }
        if tags[i].from_suffix
            && original[i] == CoarsePos::Verb
            && lower.ends_with("ing")
            && matches!(prev, Some(CoarsePos::Det | CoarsePos::Adj))
            && matches!(next, Some(CoarsePos::Noun))
        {
            tags[i].pos = CoarsePos::Adj;
            tags[i].lemma = lower;
        }
    }
    // Unknown `-s` words after a singular subject are present-tense verbs, as
    // are `-s` words coordinated with such a verb ("fills ... and hurries").
    let mut last_s_verb: Option<usize> = None;
    for i in 0..tokens.len() {
        if sentence_initial.contains(&i) {
            last_s_verb = None;
        }
        if !(tags[i].from_suffix && tags[i].pos == CoarsePos::Noun) {
            if tags[i].pos == CoarsePos::Verb && tokens[i].text.ends_with('s') {
                last_s_verb = Some(i);
            }
            continue;
        }
        let lower = tokens[i].text.to_lowercase();
        if lower.len() < 4 || !lower.ends_with('s') || lower.ends_with("ss") {
            continue;
        }
        let prev = i.checked_sub(1).map(|p| (tags[p].pos, tokens[p].text.to_lowercase()));
        let after_subject = matches!(&prev, Some((CoarsePos::Propn, _)))
            || matches!(&prev, Some((_, w)) if matches!(w.as_str(), "he" | "she" | "it"));
        let coordinated = last_s_verb.is_some() && matches!(&prev, Some((_, w)) if w == "and");
        if after_subject || coordinated {
            tags[i].pos = CoarsePos::Verb;
            tags[i].lemma = regular_verb_lemma(&lower);
            last_s_verb = Some(i);
        }
    }
    tags
}

fn entity_label(tokens: &[Token], span: Span) -> EntityLabel {
    let words: Vec<String> = tokens[span.start..span.end].iter().map(|t| t.text.to_lowercase()).collect();
    let last = words.last().map(String::as_str).unwrap_or("");
    if span.len() > 1 && LOCATION_HEADS.contains(&last) {
        EntityLabel::Location
    } else if words.iter().any(|w| TIME_WORDS.contains(&w.as_str())) {
        EntityLabel::Time
    } else if span.len() > 1 && ORG_HEADS.contains(&last) {
        EntityLabel::Org
    } else {
        EntityLabel::Person
    }
}

fn find_entities(tokens: &[Token], sentences: &[Span]) -> Vec<EntityMention> {
    let mut out = Vec::new();
    for s in sentences {
        let mut i = s.start;
        while i < s.end {
            if tokens[i].coarse_pos == CoarsePos::Propn {
                let start = i;
                while i < s.end && tokens[i].coarse_pos == CoarsePos::Propn {
                    i += 1;
                }
                let span = Span::new(start, i);
                out.push(EntityMention { span, label: entity_label(tokens, span) });
            } else {
                i += 1;
            }
        }
    }
    out
}

fn find_chunks(tokens: &[Token], sentences: &[Span]) -> Vec<NounChunk> {
    let pos = |i: usize| tokens[i].coarse_pos;
    let mut out = Vec::new();
    for s in sentences {
        let mut i = s.start;
        while i < s.end {
            let start = i;
            let mut j = i;
            if pos(j) == CoarsePos::Det {
                j += 1;
            }
            while j < s.end && matches!(pos(j), CoarsePos::Adj | CoarsePos::Num) {
                j += 1;
            }
            let noun_start = j;
            while j < s.end && pos(j).is_nominal() {
                j += 1;
            }
            if j > noun_start {
                out.push(NounChunk { span: Span::new(start, j), head: j - 1 });
                i = j;
            } else {
                i += 1;
            }
        }
    }
    out
}

/// Entities, chunks and pronoun tokens, for argument lookup.
struct Nominals {
    spans: Vec<Span>,
}

impl Nominals {
    fn new(tokens: &[Token], entities: &[EntityMention], chunks: &[NounChunk]) -> Self {
        let mut spans: Vec<Span> = entities.iter().map(|e| e.span).chain(chunks.iter().map(|c| c.span)).collect();
        spans.extend(
            tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| t.coarse_pos == CoarsePos::Pron)
                .map(|(i, _)| Span::new(i, i + 1)),
        );
        Self { spans }
    }

    /// Longest nominal ending exactly at `end`.
    fn ending_at(&self, end: usize) -> Option<Span> {
        self.spans.iter().filter(|s| s.end == end).min_by_key(|s| s.start).copied()
    }

    /// Longest nominal starting exactly at `start`.
    fn starting_at(&self, start: usize) -> Option<Span> {
        self.spans.iter().filter(|s| s.start == start).max_by_key(|s| s.end).copied()
    }
}

fn find_frames(tokens: &[Token], sentences: &[Span], nominals: &Nominals) -> Vec<PredicateFrame> {
    let pos = |i: usize| tokens[i].coarse_pos;
    let is_to = |i: usize| tokens[i].text.eq_ignore_ascii_case("to");
    let is_relative = |i: usize| matches!(tokens[i].text.to_lowercase().as_str(), "which" | "who" | "whom" | "that");
    let mut consumed = vec![false; tokens.len()];
    let mut frames = Vec::new();
    for s in sentences {
        for i in s.start..s.end {
            if pos(i) != CoarsePos::Verb || consumed[i] {
                continue;
            }
            // verb group
            let mut last = i;
            let mut trigger = i;
            loop {
                let k = last + 1;
                if k >= s.end {
                    break;
                }
                if pos(k) == CoarsePos::Verb {
                    last = k;
                    trigger = k;
                } else if pos(k) == CoarsePos::Adv {
                    let after = (k..s.end).find(|&m| pos(m) != CoarsePos::Adv);
                    if after.is_some_and(|m| pos(m) == CoarsePos::Verb) {
                        last = k;
                    } else {
                        break;
                    }
                } else if is_to(k) && k + 1 < s.end && pos(k + 1) == CoarsePos::Verb {
                    last = k;
                } else {
                    break;
                }
            }
            for flag in consumed.iter_mut().take(last + 1).skip(i) {
                *flag = true;
            }

            let mut arguments = Vec::new();
            // subject: scan backwards within the clause
            let mut k = i;
            let existential = i > s.start && tokens[i - 1].text.eq_ignore_ascii_case("there");
            if existential {
                arguments.push(Argument { role: ArgumentRole::Subject, span: Span::new(i - 1, i) });
                k = s.start;
            }
            while k > s.start {
                if let Some(span) = nominals.ending_at(k) {
                    // the object of a preposition is not a subject
                    if span.start > s.start && pos(span.start - 1) == CoarsePos::Adp {
                        k = span.start;
                        continue;
                    }
                    // a relative pronoun stands for the nominal before it
                    let antecedent = (span.len() == 1 && is_relative(span.start) && span.start > s.start)
                        .then(|| {
                            let before = span.start - usize::from(tokens[span.start - 1].text == ",");
                            nominals.ending_at(before)
                        })
                        .flatten();
                    arguments.push(Argument { role: ArgumentRole::Subject, span: antecedent.unwrap_or(span) });
                    break;
                }
                let prev = pos(k - 1);
                if matches!(prev, CoarsePos::Punct | CoarsePos::Other | CoarsePos::Verb) {
                    break;
                }
                k -= 1;
            }
            // objects and modifiers: scan forwards; linking verbs also take
            // an adjective complement
            let copular = matches!(tokens[trigger].lemma.as_str(), "be" | "feel" | "look" | "seem" | "become");
            let mut k = last + 1;
            let mut role = ArgumentRole::Object;
            while k < s.end {
                match pos(k) {
                    CoarsePos::Adv => k += 1,
                    CoarsePos::Adp => {
                        if is_to(k) && k + 1 < s.end && pos(k + 1) == CoarsePos::Verb {
                            break;
                        }
                        role = ArgumentRole::Modifier;
                        k += 1;
                    }
                    CoarsePos::Adj if copular && nominals.starting_at(k).is_none() => {
                        let end = (k..s.end).find(|&m| pos(m) != CoarsePos::Adj).unwrap_or(s.end);
                        arguments.push(Argument { role: ArgumentRole::Object, span: Span::new(k, end) });
                        break;
                    }
                    _ => {
                        let Some(span) = nominals.starting_at(k) else { break };
                        arguments.push(Argument { role, span });
                        k = span.end;
                        if role == ArgumentRole::Object {
                            let second = (k < s.end && !is_relative(k)).then(|| nominals.starting_at(k)).flatten();
                            if let Some(second) = second {
                                arguments.push(Argument { role: ArgumentRole::Object, span: second });
                                k = second.end;
                            }
                        }
                        if k + 1 < s.end && is_to(k) && pos(k + 1) == CoarsePos::Verb {
                            arguments.push(Argument { role: ArgumentRole::Modifier, span: Span::new(k, k + 2) });
                            consumed[k] = true;
                            consumed[k + 1] = true;
                        }
                        break;
                    }
                }
            }
            frames.push(PredicateFrame { trigger, verb_group_start: Some(i), arguments });
        }
    }
    frames
}

pub(crate) fn annotate_reference(text: &str) -> Annotation {
    let raw = tokenize(text);
    let sentences = split_sentences(&raw);
    let tags = tag(&raw, &sentences);
    let tokens: Vec<Token> = raw
        .into_iter()
        .zip(tags)
        .map(|(r, t)| Token { text: r.text, lemma: t.lemma, coarse_pos: t.pos, char_start: r.start, char_end: r.end })
        .collect();
    let entities = find_entities(&tokens, &sentences);
    let chunks = find_chunks(&tokens, &sentences);
    let nominals = Nominals::new(&tokens, &entities, &chunks);
    let frames = find_frames(&tokens, &sentences, &nominals);
    Annotation { tokens, sentences, entities, chunks, frames }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lingann::annotate;

    fn ann(text: &str) -> Annotation {
        annotate(text, &ReferenceAnnotator::new()).unwrap()
    }

    fn words(a: &Annotation, text: &str, span: Span) -> String {
        a.surface(text, span).to_string()
    }

    #[test]
    fn maie_sighed() {
        let text = "Maie sighed.";
        let a = ann(text);
        assert_eq!(a.tokens.len(), 3);
        assert_eq!(a.tokens[0].coarse_pos, CoarsePos::Propn);
        assert_eq!(a.tokens[1].coarse_pos, CoarsePos::Verb);
        assert_eq!(a.entities, vec![EntityMention { span: Span::new(0, 1), label: EntityLabel::Person }]);
        assert_eq!(a.frames.len(), 1);
        assert_eq!(a.frames[0].trigger, 1);
        assert_eq!(a.frames[0].subject().unwrap().span, Span::new(0, 1));
    }

    #[test]
    fn the_cow() {
        let a = ann("the cow");
        assert_eq!(a.chunks, vec![NounChunk { span: Span::new(0, 2), head: 1 }]);
        assert!(a.frames.is_empty());
        assert!(a.entities.is_empty());
    }

    #[test]
    fn sentence_initial_function_word_is_not_an_entity() {
        let a = ann("The cow ran home. She was glad.");
        assert!(a.entities.is_empty(), "{:?}", a.entities);
    }

    #[test]
    fn sentence_initial_word_recurring_capitalised_is_an_entity() {
        let text = "Snowflake melted. They loved Snowflake.";
        let a = ann(text);
        assert_eq!(a.entities.len(), 2);
    }

    #[test]
    fn unknown_s_words_after_singular_subjects_are_verbs() {
        let text = "He fills his bags and hurries home. The bags were full.";
        let a = ann(text);
        let pos = |i: usize| (a.tokens[i].coarse_pos, a.tokens[i].lemma.as_str());
        assert_eq!(pos(1), (CoarsePos::Verb, "fill"));
        assert_eq!(pos(3).0, CoarsePos::Noun);
        assert_eq!(pos(5), (CoarsePos::Verb, "hurry"));
        assert_eq!(pos(9).0, CoarsePos::Noun);
    }

    #[test]
    fn relative_pronoun_subject_resolves_to_antecedent() {
        let text = "There stood a house which was said to be haunted.";
        let a = ann(text);
        let subjects: Vec<String> =
            a.frames.iter().filter_map(|f| f.subject()).map(|s| words(&a, text, s.span)).collect();
        assert_eq!(subjects, vec!["There", "a house"]);
        let stood = &a.frames[0];
        let objects: Vec<String> = stood.arguments.iter().skip(1).map(|x| words(&a, text, x.span)).collect();
        assert_eq!(objects, vec!["a house"]);

        let text = "He met Wang, who wandered away.";
        let a = ann(text);
        let wandered = a.frames.iter().find(|f| a.tokens[f.trigger].text == "wandered").unwrap();
        assert_eq!(words(&a, text, wandered.subject().unwrap().span), "Wang");
    }

    #[test]
    fn quote_initial_capital_is_not_a_name() {
        let text = "The captain shouts, 'Open the door!'";
        let a = ann(text);
        assert!(a.entities.is_empty(), "{:?}", a.entities);
        assert_eq!(a.tokens[5].coarse_pos, CoarsePos::Verb);
    }

    #[test]
    fn quotes_close_sentences_without_space() {
        let text = "they wanted to eat.'bring us a junket,' cried they.";
        let a = ann(text);
        assert_eq!(a.sentences.len(), 2);
        assert_eq!(words(&a, text, a.sentences[0]), "they wanted to eat.'");
    }

    #[test]
    fn infinitive_object_is_a_modifier() {
        let text = "they were students, on a boating excursion, and wanted to get something to eat.";
        let a = ann(text);
        let wanted = a.frames.iter().find(|f| a.tokens[f.verb_group().start].text == "wanted").unwrap();
        assert!(wanted.subject().is_none());
        assert_eq!(words(&a, text, wanted.extent()), "wanted to get something to eat");
        assert!(a.chunks.iter().any(|c| words(&a, text, c.span) == "a boating excursion"));
    }

    #[test]
    fn prepositional_argument() {
        let text = "Ali Baba goes to the cave.";
        let a = ann(text);
        assert_eq!(a.entities[0].span, Span::new(0, 2));
        let f = &a.frames[0];
        assert_eq!(words(&a, text, f.extent()), "Ali Baba goes to the cave");
        assert_eq!(f.arguments[1].role, ArgumentRole::Modifier);
    }

    #[test]
    fn locations_and_times() {
        let a = ann("He went to Emmet Village in March.");
        let labels: Vec<_> = a.entities.iter().map(|e| e.label).collect();
        assert_eq!(labels, vec![EntityLabel::Location, EntityLabel::Time]);
    }

    #[test]
    fn offsets_reconstruct_text() {
        let text = "  Caf\u{e9} owner\u{2019}s cow \u{201C}Bess\u{201D} ran\u{2014}fast!\n";
        let a = ann(text);
        let mut rebuilt = String::new();
        let mut cursor = 0;
        for t in &a.tokens {
            rebuilt.push_str(crate::lingann::char_slice(text, cursor, t.char_start));
            rebuilt.push_str(&t.text);
            cursor = t.char_end;
        }
        rebuilt.push_str(crate::lingann::char_slice(text, cursor, text.chars().count()));
        assert_eq!(rebuilt, text);
    }
}
