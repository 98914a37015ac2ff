//! Evaluation data model: labels, valid response sets, items and corpora.
//!
//! A [`Corpus`] is validated on construction, so every label it carries is a
//! member of its alphabet and every `item_id` is unique. Rules that describe
//! data quality rather than structure (missing ratings, audit flags that
//! contradict a known valid response set) are reported by
//! [`validate_corpus`] instead of being rejected.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One forced-choice response option. Compared by exact, case-sensitive text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(String);

impl Label {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() || value.contains(['\n', '\r']) {
            return Err(Error::InvalidLabel(value));
        }
        Ok(Label(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Label {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Label::new(value)
    }
}

impl From<Label> for String {
    fn from(label: Label) -> Self {
        label.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered set of response options. The order is fixed at construction and
/// is what breaks ties during aggregation.
#[derive(Debug, Clone)]
pub struct LabelAlphabet {
    labels: Vec<Label>,
    positions: HashMap<Label, usize>,
}

impl LabelAlphabet {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "need at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut positions = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if positions.insert(label.clone(), i).is_some() {
                return Err(Error::InvalidAlphabet(format!("duplicate label {label:?}")));
            }
        }
        Ok(LabelAlphabet { labels, positions })
    }

    /// Convenience constructor from string slices.
    pub fn from_strs<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let labels = labels
            .iter()
            .map(|s| Label::new(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: &Label) -> Option<usize> {
        self.positions.get(label).copied()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.positions.contains_key(label)
    }

    pub fn get(&self, index: usize) -> Option<&Label> {
        self.labels.get(index)
    }
}

impl PartialEq for LabelAlphabet {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Eq for LabelAlphabet {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub response: Label,
}

impl RatingRecord {
    pub fn new(rater_id: impl Into<String>, response: Label) -> Self {
        RatingRecord {
            rater_id: rater_id.into(),
            response,
        }
    }
}

/// The responses that are correct under at least one reasonable reading of
/// an item. Members keep the order they were given in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Label>", into = "Vec<Label>")]
pub struct ValidResponseSet {
    members: Vec<Label>,
}

impl ValidResponseSet {
    pub fn new(members: Vec<Label>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyValidResponseSet);
        }
        let mut seen = HashSet::with_capacity(members.len());
        for m in &members {
            if !seen.insert(m) {
                return Err(Error::DuplicateVrsMember(m.to_string()));
            }
        }
        Ok(ValidResponseSet { members })
    }

    pub fn singleton(label: Label) -> Self {
        ValidResponseSet {
            members: vec![label],
        }
    }

    pub fn members(&self) -> &[Label] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.members.contains(label)
    }

    pub fn is_determinate(&self) -> bool {
        self.members.len() == 1
    }

    pub fn is_indeterminate(&self) -> bool {
        self.members.len() >= 2
    }
}

impl TryFrom<Vec<Label>> for ValidResponseSet {
    type Error = Error;

    fn try_from(members: Vec<Label>) -> Result<Self> {
        ValidResponseSet::new(members)
    }
}

impl From<ValidResponseSet> for Vec<Label> {
    fn from(vrs: ValidResponseSet) -> Self {
        vrs.members
    }
}

/// One row of an evaluation corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub item_id: String,
    pub instruction: Option<String>,
    pub ratings: Vec<RatingRecord>,
    pub llm_response: Label,
    pub llm_samples: Option<Vec<Label>>,
    pub vrs: Option<ValidResponseSet>,
    pub indeterminate_flag: Option<bool>,
}

impl Item {
    pub fn new(
        item_id: impl Into<String>,
        ratings: Vec<RatingRecord>,
        llm_response: Label,
    ) -> Self {
        Item {
            item_id: item_id.into(),
            instruction: None,
            ratings,
            llm_response,
            llm_samples: None,
            vrs: None,
            indeterminate_flag: None,
        }
    }

    pub fn rating_labels(&self) -> impl Iterator<Item = &Label> {
        self.ratings.iter().map(|r| &r.response)
    }

    /// Every label referenced by the item, in field order.
    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.rating_labels()
            .chain(std::iter::once(&self.llm_response))
            .chain(self.llm_samples.iter().flatten())
            .chain(self.vrs.iter().flat_map(|v| v.members()))
    }

    /// Whether the item is known to have more than one correct response,
    /// from its valid response set if present, otherwise from its audit flag.
    pub fn known_indeterminate(&self) -> Option<bool> {
        match &self.vrs {
            Some(vrs) => Some(vrs.is_indeterminate()),
            None => self.indeterminate_flag,
        }
    }
}

/// Ordered collection of items over one alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    alphabet: LabelAlphabet,
    items: Vec<Item>,
}

impl Corpus {
    pub fn new(alphabet: LabelAlphabet, items: Vec<Item>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut ids = HashSet::with_capacity(items.len());
        for item in &items {
            if !ids.insert(item.item_id.as_str()) {
                return Err(Error::DuplicateItemId(item.item_id.clone()));
            }
            check_item_labels(&alphabet, item)?;
        }
        Ok(Corpus { alphabet, items })
    }

    pub fn alphabet(&self) -> &LabelAlphabet {
        &self.alphabet
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn into_parts(self) -> (LabelAlphabet, Vec<Item>) {
        (self.alphabet, self.items)
    }

    /// Whether every item carries a valid response set.
    pub fn has_full_vrs(&self) -> bool {
        self.items.iter().all(|i| i.vrs.is_some())
    }
}

pub(crate) fn check_item_labels(alphabet: &LabelAlphabet, item: &Item) -> Result<()> {
    match item.labels().find(|l| !alphabet.contains(l)) {
        Some(label) => Err(Error::LabelOutsideAlphabet {
            item_id: item.item_id.clone(),
            label: label.to_string(),
        }),
        None => Ok(()),
    }
}

/// Result of an audit: whether a human judged the item to admit more than
/// one correct response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecord {
    pub item_id: String,
    pub indeterminate: bool,
}

/// Modal share of a response multiset: the count of the most frequent label
/// divided by the number of responses.
pub fn agreement_score<'a, I>(responses: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Label>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut total = 0usize;
    for label in responses {
        *counts.entry(label.as_str()).or_default() += 1;
        total += 1;
    }
    let modal = counts
        .values()
        .copied()
        .max()
        .ok_or(Error::EmptyResponses)?;
    Ok(modal as f64 / total as f64)
}

/// Sets `indeterminate_flag` on every audited item. Repeating an audit with
/// the same verdict is accepted; contradicting verdicts are not.
pub fn merge_audit(corpus: &Corpus, audits: &[AuditRecord]) -> Result<Corpus> {
    let index: HashMap<&str, usize> = corpus
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| (item.item_id.as_str(), i))
        .collect();
    let mut verdicts: HashMap<usize, bool> = HashMap::new();
    for audit in audits {
        let pos = *index
            .get(audit.item_id.as_str())
            .ok_or_else(|| Error::UnknownItemId(audit.item_id.clone()))?;
        match verdicts.insert(pos, audit.indeterminate) {
            Some(prev) if prev != audit.indeterminate => {
                return Err(Error::ConflictingAudit(audit.item_id.clone()));
            }
            _ => {}
        }
    }
    let mut merged = corpus.clone();
    for (pos, flag) in verdicts {
        merged.items[pos].indeterminate_flag = Some(flag);
    }
    Ok(merged)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Rule {
    NoRatings,
    FlagVrsMismatch,
    DuplicateRater { rater_id: String },
}

impl Rule {
    pub fn severity(&self) -> Severity {
        match self {
            Rule::NoRatings | Rule::FlagVrsMismatch => Severity::Error,
            Rule::DuplicateRater { .. } => Severity::Warning,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::NoRatings => f.write_str("no ratings"),
            Rule::FlagVrsMismatch => f.write_str("flag/vrs mismatch"),
            Rule::DuplicateRater { rater_id } => write!(f, "duplicate rater_id {rater_id:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub item_id: String,
    #[serde(flatten)]
    pub rule: Rule,
}

impl Violation {
    pub fn severity(&self) -> Severity {
        self.rule.severity()
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity() {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: item {:?}: {}", self.item_id, self.rule)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity() == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity() == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }
}

/// Checks the per-item data-quality rules. Violations are returned in item
/// order; the corpus is never modified.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut violations = Vec::new();
    for item in &corpus.items {
        let mut push = |rule| {
            violations.push(Violation {
                item_id: item.item_id.clone(),
                rule,
            })
        };
        if item.ratings.is_empty() {
            push(Rule::NoRatings);
        }
        if let (Some(vrs), Some(flag)) = (&item.vrs, item.indeterminate_flag) {
            if vrs.is_indeterminate() != flag {
                push(Rule::FlagVrsMismatch);
            }
        }
        let mut raters = HashSet::new();
        let mut reported = HashSet::new();
        for r in &item.ratings {
            if !raters.insert(r.rater_id.as_str()) && reported.insert(r.rater_id.as_str()) {
                push(Rule::DuplicateRater {
                    rater_id: r.rater_id.clone(),
                });
            }
        }
    }
    ValidationReport { violations }
}
