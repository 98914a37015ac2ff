//! Collapsing per-rater responses into a gold label or a soft label.

use serde::Serialize;

use crate::corpus::{Label, LabelAlphabet, RatingRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldLabel {
    pub label: Label,
    /// Modal share behind the choice; equals the agreement score.
    pub support: f64,
    /// More than one label reached the modal count.
    pub tie_broken: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftLabel {
    /// Observed labels in alphabet order with their empirical frequency.
    pub distribution: Vec<(Label, f64)>,
}

impl SoftLabel {
    pub fn get(&self, label: &Label) -> f64 {
        self.distribution
            .iter()
            .find(|(l, _)| l == label)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// Per-label counts indexed by alphabet position.
fn tally(ratings: &[RatingRecord], alphabet: &LabelAlphabet) -> Result<Vec<usize>> {
    if ratings.is_empty() {
        return Err(Error::EmptyResponses);
    }
    let mut counts = vec![0usize; alphabet.len()];
    for r in ratings {
        let pos = alphabet
            .position(&r.response)
            .ok_or_else(|| Error::LabelOutsideAlphabet {
                item_id: String::new(),
                label: r.response.to_string(),
            })?;
        counts[pos] += 1;
    }
    Ok(counts)
}

/// Plurality vote. Ties go to the label that comes first in the alphabet.
pub fn plurality_gold_label(
    ratings: &[RatingRecord],
    alphabet: &LabelAlphabet,
) -> Result<GoldLabel> {
    let counts = tally(ratings, alphabet)?;
    let modal = *counts.iter().max().expect("alphabet is non-empty");
    let winner = counts.iter().position(|&c| c == modal).expect("max exists");
    let tied = counts.iter().filter(|&&c| c == modal).count();
    Ok(GoldLabel {
        label: alphabet.labels()[winner].clone(),
        support: modal as f64 / ratings.len() as f64,
        tie_broken: tied > 1,
    })
}

pub fn soft_label(ratings: &[RatingRecord], alphabet: &LabelAlphabet) -> Result<SoftLabel> {
    let counts = tally(ratings, alphabet)?;
    let total = ratings.len() as f64;
    let distribution = alphabet
        .labels()
        .iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(l, c)| (l.clone(), c as f64 / total))
        .collect();
    Ok(SoftLabel { distribution })
}
