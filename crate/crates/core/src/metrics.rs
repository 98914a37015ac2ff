//! Gold-label concurrence and true performance over a corpus.
//!
//! Both metrics are empirical frequencies: matches are counted as integers
//! and divided once, so results do not depend on item order.

use serde::Serialize;

use crate::aggregation::plurality_gold_label;
use crate::corpus::{agreement_score, Corpus, Item, LabelAlphabet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub n_items: usize,
    pub gold_concurrence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_performance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub mean_agreement: f64,
    pub n_indeterminate_known: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemCorrectness {
    pub item_id: String,
    pub matched_gold: bool,
    pub in_vrs: Option<bool>,
}

/// Whether the model response equals the plurality gold label.
pub(crate) fn matches_gold(item: &Item, alphabet: &LabelAlphabet) -> Result<bool> {
    if item.ratings.is_empty() {
        return Err(Error::NoRatings(item.item_id.clone()));
    }
    let gold = plurality_gold_label(&item.ratings, alphabet)?;
    Ok(gold.label == item.llm_response)
}

pub(crate) fn gold_match_flags(corpus: &Corpus) -> Result<Vec<bool>> {
    corpus
        .items()
        .iter()
        .map(|item| matches_gold(item, corpus.alphabet()))
        .collect()
}

pub(crate) fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

/// Share of items whose model response equals the gold label.
pub fn gold_concurrence(corpus: &Corpus) -> Result<f64> {
    let matched = gold_match_flags(corpus)?.into_iter().filter(|&m| m).count();
    Ok(fraction(matched, corpus.len()))
}

/// Share of items whose model response lies in the item's valid response
/// set. Every item must carry one; see [`crate::bounds`] otherwise.
pub fn true_performance(corpus: &Corpus) -> Result<f64> {
    let mut correct = 0;
    for item in corpus.items() {
        let vrs = item
            .vrs
            .as_ref()
            .ok_or_else(|| Error::MissingVrs(item.item_id.clone()))?;
        if vrs.contains(&item.llm_response) {
            correct += 1;
        }
    }
    Ok(fraction(correct, corpus.len()))
}

pub fn per_item_correctness(corpus: &Corpus) -> Result<Vec<ItemCorrectness>> {
    corpus
        .items()
        .iter()
        .map(|item| {
            Ok(ItemCorrectness {
                item_id: item.item_id.clone(),
                matched_gold: matches_gold(item, corpus.alphabet())?,
                in_vrs: item.vrs.as_ref().map(|v| v.contains(&item.llm_response)),
            })
        })
        .collect()
}

pub fn evaluate(corpus: &Corpus) -> Result<EvaluationReport> {
    let gold_concurrence = gold_concurrence(corpus)?;
    let true_performance = if corpus.has_full_vrs() {
        Some(true_performance(corpus)?)
    } else {
        None
    };
    let agreement_total: f64 = corpus
        .items()
        .iter()
        .map(|item| agreement_score(item.rating_labels()))
        .sum::<Result<f64>>()?;
    let n_indeterminate_known = corpus
        .items()
        .iter()
        .filter(|item| item.known_indeterminate() == Some(true))
        .count();
    Ok(EvaluationReport {
        n_items: corpus.len(),
        gold_concurrence,
        true_performance,
        gap: true_performance.map(|t| t - gold_concurrence),
        mean_agreement: agreement_total / corpus.len() as f64,
        n_indeterminate_known,
    })
}
