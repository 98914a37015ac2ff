use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid label {0:?}: labels must be non-empty and contain no newlines")]
    InvalidLabel(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("duplicate item_id {0:?}")]
    DuplicateItemId(String),

    #[error("item {item_id:?}: label {label:?} is outside the alphabet")]
    LabelOutsideAlphabet { item_id: String, label: String },

    #[error("valid response set must be non-empty")]
    EmptyValidResponseSet,

    #[error("valid response set lists {0:?} more than once")]
    DuplicateVrsMember(String),

    #[error("cannot score an empty sequence of responses")]
    EmptyResponses,

    #[error("corpus has no items")]
    EmptyCorpus,

    #[error("item {0:?} has no ratings")]
    NoRatings(String),

    #[error("item {0:?} has no valid response set")]
    MissingVrs(String),

    #[error("item {0:?} has no llm_samples")]
    MissingSamples(String),

    #[error("unknown item_id {0:?}")]
    UnknownItemId(String),

    #[error("conflicting audits for item {0:?}")]
    ConflictingAudit(String),

    #[error("audit for item {0:?} is not filled in")]
    UnfilledAudit(String),

    #[error("no audit records")]
    EmptyAudits,

    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("item {0:?} appears in both partition sets")]
    PartitionOverlap(String),

    #[error("item {0:?} is not covered by the partition")]
    PartitionUncovered(String),

    #[error("sample size {requested} is invalid for a corpus of {available} items")]
    InvalidSampleSize { requested: usize, available: usize },

    #[error("invalid simulation config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            e @ (Error::Malformed { .. } | Error::AtLine { .. }) => e,
            e => Error::AtLine {
                line,
                source: Box::new(e),
            },
        }
    }

    /// Strips any line-number wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLine { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn check_fraction(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            range: "[0, 1]",
            value,
        })
    }
}
