//! Performance intervals on true performance from partial knowledge.
//!
//! All intervals assume the gold label is itself a valid response
//! (tag `gold-in-vrs`): every gold match is then correct, and only
//! indeterminate items can turn a gold mismatch into a correct response.
//! Partition-based upper bounds additionally need the indeterminate side of
//! the partition to contain every truly indeterminate item
//! (tag `partition-superset`).

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::corpus::{agreement_score, Corpus, Item};
use crate::error::{check_fraction, Error, Result};
use crate::metrics::{fraction, gold_match_flags};

pub const GOLD_IN_VRS: &str = "gold-in-vrs";
pub const PARTITION_SUPERSET: &str = "partition-superset";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Prevalence,
    Partition,
    Mixed,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Prevalence => "prevalence",
            Method::Partition => "partition",
            Method::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceInterval {
    pub method: Method,
    pub lower: f64,
    pub upper: f64,
    pub assumptions: Vec<String>,
}

impl PerformanceInterval {
    fn new(method: Method, lower: f64, upper: f64, assumptions: &[&str]) -> Self {
        debug_assert!(0.0 <= lower && lower <= upper && upper <= 1.0);
        PerformanceInterval {
            method,
            lower,
            upper,
            assumptions: assumptions.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn width(&self) -> f64 {
        interval_width(self)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn with_assumption(mut self, tag: impl Into<String>) -> Self {
        self.assumptions.push(tag.into());
        self
    }
}

pub fn interval_width(interval: &PerformanceInterval) -> f64 {
    interval.upper - interval.lower
}

/// Split of a corpus into items treated as determinate and items that may be
/// indeterminate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub determinate_ids: BTreeSet<String>,
    pub indeterminate_ids: BTreeSet<String>,
}

impl Partition {
    pub fn new(
        determinate_ids: BTreeSet<String>,
        indeterminate_ids: BTreeSet<String>,
    ) -> Result<Self> {
        if let Some(id) = determinate_ids.intersection(&indeterminate_ids).next() {
            return Err(Error::PartitionOverlap(id.clone()));
        }
        Ok(Partition {
            determinate_ids,
            indeterminate_ids,
        })
    }

    fn from_predicate(
        corpus: &Corpus,
        mut indeterminate: impl FnMut(&Item) -> Result<bool>,
    ) -> Result<Self> {
        let mut p = Partition::default();
        for item in corpus.items() {
            let side = if indeterminate(item)? {
                &mut p.indeterminate_ids
            } else {
                &mut p.determinate_ids
            };
            side.insert(item.item_id.clone());
        }
        Ok(p)
    }

    pub fn is_indeterminate(&self, item_id: &str) -> bool {
        self.indeterminate_ids.contains(item_id)
    }

    /// Checks that the two sets are disjoint and cover exactly the corpus.
    pub fn check_against(&self, corpus: &Corpus) -> Result<()> {
        if let Some(id) = self
            .determinate_ids
            .intersection(&self.indeterminate_ids)
            .next()
        {
            return Err(Error::PartitionOverlap(id.clone()));
        }
        for item in corpus.items() {
            let id = item.item_id.as_str();
            if !self.determinate_ids.contains(id) && !self.indeterminate_ids.contains(id) {
                return Err(Error::PartitionUncovered(item.item_id.clone()));
            }
        }
        let covered = self.determinate_ids.len() + self.indeterminate_ids.len();
        if covered != corpus.len() {
            let unknown = self
                .determinate_ids
                .iter()
                .chain(&self.indeterminate_ids)
                .find(|id| corpus.get(id).is_none())
                .expect("extra ids exist when counts differ");
            return Err(Error::UnknownItemId(unknown.clone()));
        }
        Ok(())
    }
}

/// Partition read off the items' valid response sets.
pub fn oracle_partition(corpus: &Corpus) -> Result<Partition> {
    Partition::from_predicate(corpus, |item| {
        item.vrs
            .as_ref()
            .map(|v| v.is_indeterminate())
            .ok_or_else(|| Error::MissingVrs(item.item_id.clone()))
    })
}

/// Partition from audit knowledge: the valid response set when present,
/// otherwise the audit flag. Items with neither go to the indeterminate side.
pub fn flag_partition(corpus: &Corpus) -> Partition {
    Partition::from_predicate(corpus, |item| {
        Ok(item.known_indeterminate().unwrap_or(true))
    })
    .expect("predicate is infallible")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementSource {
    Raters,
    LlmSamples,
}

/// Items whose agreement score falls strictly below `tau` are deemed
/// indeterminate.
pub fn threshold_partition(
    corpus: &Corpus,
    tau: f64,
    source: AgreementSource,
) -> Result<Partition> {
    check_fraction("tau", tau)?;
    Partition::from_predicate(corpus, |item| {
        let score = match source {
            AgreementSource::Raters => {
                if item.ratings.is_empty() {
                    return Err(Error::NoRatings(item.item_id.clone()));
                }
                agreement_score(item.rating_labels())?
            }
            AgreementSource::LlmSamples => match &item.llm_samples {
                Some(samples) if !samples.is_empty() => agreement_score(samples)?,
                _ => return Err(Error::MissingSamples(item.item_id.clone())),
            },
        };
        Ok(score < tau)
    })
}

/// Interval from the share `p` of indeterminate items alone:
/// `[M, min(1, M + p)]` where `M` is the gold concurrence.
pub fn prevalence_interval(corpus: &Corpus, p: f64) -> Result<PerformanceInterval> {
    check_fraction("p", p)?;
    let n = corpus.len();
    let matched = gold_match_flags(corpus)?.into_iter().filter(|&m| m).count();
    // p*N is the number of items that may convert a mismatch; remove float
    // noise when p was itself computed as count/N.
    let budget = p * n as f64;
    let budget = if (budget - budget.round()).abs() < 1e-9 {
        budget.round()
    } else {
        budget
    };
    let upper = ((matched as f64 + budget) / n as f64).min(1.0);
    Ok(PerformanceInterval::new(
        Method::Prevalence,
        fraction(matched, n),
        upper,
        &[GOLD_IN_VRS],
    ))
}

/// Interval from an explicit split: determinate items count as scored by
/// the gold label; indeterminate mismatches may be correct.
pub fn partition_interval(corpus: &Corpus, partition: &Partition) -> Result<PerformanceInterval> {
    partition.check_against(corpus)?;
    let flags = gold_match_flags(corpus)?;
    let mut lower = 0;
    let mut upper = 0;
    for (item, matched) in corpus.items().iter().zip(flags) {
        lower += matched as usize;
        upper += (matched || partition.is_indeterminate(&item.item_id)) as usize;
    }
    let n = corpus.len();
    Ok(PerformanceInterval::new(
        Method::Partition,
        fraction(lower, n),
        fraction(upper, n),
        &[GOLD_IN_VRS, PARTITION_SUPERSET],
    ))
}

/// Partition interval where items carrying a valid response set contribute
/// their exact correctness to both ends.
pub fn mixed_interval(corpus: &Corpus, partition: &Partition) -> Result<PerformanceInterval> {
    partition.check_against(corpus)?;
    let flags = gold_match_flags(corpus)?;
    let mut lower = 0;
    let mut upper = 0;
    for (item, matched) in corpus.items().iter().zip(flags) {
        match &item.vrs {
            Some(vrs) => {
                let correct = vrs.contains(&item.llm_response) as usize;
                lower += correct;
                upper += correct;
            }
            None => {
                lower += matched as usize;
                upper += (matched || partition.is_indeterminate(&item.item_id)) as usize;
            }
        }
    }
    let n = corpus.len();
    Ok(PerformanceInterval::new(
        Method::Mixed,
        fraction(lower, n),
        fraction(upper, n),
        &[GOLD_IN_VRS, PARTITION_SUPERSET],
    ))
}
