//! Evaluation of forced-choice model responses when some items admit more
//! than one correct answer.
//!
//! The crate scores a model against aggregated gold labels and against
//! per-item valid response sets, bounds the latter when the sets are only
//! partially known, estimates how many items are indeterminate from an
//! audit sample, and simulates corpora from a rating-process model.

pub mod aggregation;
pub mod bounds;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod estimation;
pub mod jsonl;
pub mod metrics;
pub mod rng;
pub mod simulate;

pub use aggregation::{plurality_gold_label, soft_label, GoldLabel, SoftLabel};
pub use bounds::{
    flag_partition, interval_width, mixed_interval, oracle_partition, partition_interval,
    prevalence_interval, threshold_partition, AgreementSource, Method, Partition,
    PerformanceInterval,
};
pub use corpus::{
    agreement_score, merge_audit, validate_corpus, AuditRecord, Corpus, Item, Label, LabelAlphabet,
    RatingRecord, ValidResponseSet, ValidationReport, Violation,
};
pub use error::{Error, Result};
pub use estimation::{
    draw_audit_sample, estimate_prevalence, widened_prevalence_interval, PrevalenceEstimate,
};
pub use jsonl::{parse_audits, parse_corpus, write_corpus};
pub use metrics::{
    evaluate, gold_concurrence, per_item_correctness, true_performance, EvaluationReport,
    ItemCorrectness,
};
pub use simulate::{
    simulate_corpus, sweep_indeterminacy, GroundTruth, SimulationConfig, SweepRow, SweepTable,
};
