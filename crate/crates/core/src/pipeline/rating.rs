use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Corpus, SectionKey};
use crate::ranker::RankedQAPair;

/// One pair to be rated, with the system that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingItem {
    pub system: String,
    pub pair: RankedQAPair,
}

/// A source-blinded sheet plus the key that maps items back to systems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingSheet {
    pub sheet_csv: String,
    pub key_csv: String,
}

#[derive(Serialize)]
struct SheetRow<'a> {
    item_id: &'a str,
    story_id: &'a str,
    section_index: u32,
    section_text: &'a str,
    question: &'a str,
    answer: &'a str,
    readability: &'a str,
    question_relevancy: &'a str,
    answer_relevancy: &'a str,
}

#[derive(Serialize)]
struct KeyRow<'a> {
    item_id: &'a str,
    system: &'a str,
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rating rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// Shuffles the items with `seed` and writes a sheet with empty columns for
/// readability, question relevancy and answer relevancy. System names appear
/// only in the key.
pub fn export_rating_sheet(corpus: &Corpus, items: &[RatingItem], seed: u64) -> RatingSheet {
    let mut order: Vec<&RatingItem> = items.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let width = order.len().to_string().len().max(4);
    let ids: Vec<String> = (1..=order.len()).map(|i| format!("item-{i:0width$}")).collect();
    let mut texts: BTreeMap<SectionKey, String> = BTreeMap::new();
    for it in &order {
        let key = it.pair.section_key();
        let text = corpus.section(&key).map(|s| s.text.clone()).unwrap_or_default();
        texts.entry(key).or_insert(text);
    }
    let sheet_csv = to_csv(order.iter().zip(&ids).map(|(it, id)| SheetRow {
        item_id: id,
        story_id: &it.pair.story_id,
        section_index: it.pair.section_index,
        section_text: &texts[&it.pair.section_key()],
        question: &it.pair.question,
        answer: &it.pair.answer,
        readability: "",
        question_relevancy: "",
        answer_relevancy: "",
    }));
    let key_csv = to_csv(order.iter().zip(&ids).map(|(it, id)| KeyRow { item_id: id, system: &it.system }));
    RatingSheet { sheet_csv, key_csv }
}
