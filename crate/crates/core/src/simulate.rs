//! Synthetic corpora drawn from the rating-process model, and the
//! indeterminacy sweep built on them.
//!
//! Per item, on its own random stream derived from `(seed, item index)`:
//!
//! 1. With probability `pi` the item is indeterminate: its valid response
//!    set has a size drawn uniformly from `2..=vrs_max` and members drawn
//!    without replacement from the alphabet. Otherwise it is a uniformly
//!    chosen singleton.
//! 2. Interpretation weights over the members come from a symmetric
//!    Dirichlet with concentration `dirichlet_alpha`.
//! 3. Each rater errs with probability `epsilon` and then answers uniformly
//!    over the whole alphabet; otherwise the rater picks a member by weight.
//! 4. With probability `llm_competence` the model picks a member by weight;
//!    otherwise it answers uniformly over the whole alphabet.

use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    oracle_partition, partition_interval, prevalence_interval, threshold_partition, AgreementSource,
};
use crate::corpus::{Corpus, Item, Label, LabelAlphabet, RatingRecord, ValidResponseSet};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub n_items: usize,
    pub alphabet_size: usize,
    pub pi: f64,
    pub vrs_max: usize,
    pub raters_per_item: usize,
    pub rater_error: f64,
    pub llm_competence: f64,
    pub dirichlet_alpha: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_items: 2000,
            alphabet_size: 4,
            pi: 0.0,
            vrs_max: 3,
            raters_per_item: 5,
            rater_error: 0.05,
            llm_competence: 0.8,
            dirichlet_alpha: 1.0,
            seed: 0,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(invalid("n_items", "must be at least 1"));
        }
        if self.alphabet_size < 2 {
            return Err(invalid("alphabet_size", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(invalid(
                "pi",
                format!("must lie in [0, 1], got {}", self.pi),
            ));
        }
        if self.vrs_max < 2 || self.vrs_max > self.alphabet_size {
            return Err(invalid(
                "vrs_max",
                format!(
                    "must lie in [2, {}], got {}",
                    self.alphabet_size, self.vrs_max
                ),
            ));
        }
        if self.raters_per_item == 0 {
            return Err(invalid("raters_per_item", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.rater_error) {
            return Err(invalid(
                "rater_error",
                format!("must lie in [0, 1), got {}", self.rater_error),
            ));
        }
        if !(0.0..=1.0).contains(&self.llm_competence) {
            return Err(invalid(
                "llm_competence",
                format!("must lie in [0, 1], got {}", self.llm_competence),
            ));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(invalid(
                "dirichlet_alpha",
                format!("must be positive and finite, got {}", self.dirichlet_alpha),
            ));
        }
        Ok(())
    }
}

/// Letters for small alphabets, `L<i>` beyond 26.
pub fn simulated_alphabet(size: usize) -> LabelAlphabet {
    let labels = (0..size)
        .map(|i| {
            let text = if size <= 26 {
                ((b'A' + i as u8) as char).to_string()
            } else {
                format!("L{i}")
            };
            Label::new(text).expect("generated labels are valid")
        })
        .collect();
    LabelAlphabet::new(labels).expect("generated labels are distinct")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemTruth {
    pub vrs: ValidResponseSet,
    /// Weight of each member, in member order; strictly positive, sums to 1.
    pub interpretation_weights: Vec<(Label, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub items: Vec<ItemTruth>,
}

impl GroundTruth {
    pub fn indeterminate_count(&self) -> usize {
        self.items
            .iter()
            .filter(|t| t.vrs.is_indeterminate())
            .count()
    }
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn dirichlet_weights(rng: &mut ChaCha8Rng, size: usize, alpha: f64) -> Vec<f64> {
    if size == 1 {
        return vec![1.0];
    }
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let mut draws: Vec<f64> = (0..size)
        .map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = draws.iter().sum();
    for d in &mut draws {
        *d /= total;
    }
    draws
}

fn simulate_item(
    config: &SimulationConfig,
    alphabet: &LabelAlphabet,
    index: usize,
) -> (Item, ItemTruth) {
    let mut rng = rng::stream(config.seed, &[index as u64]);
    let k = config.alphabet_size;

    let indeterminate = rng.random::<f64>() < config.pi;
    let mut members: Vec<usize> = if indeterminate {
        let size = rng.random_range(2..=config.vrs_max);
        sample(&mut rng, k, size).into_vec()
    } else {
        vec![rng.random_range(0..k)]
    };
    members.sort_unstable();

    let weights = dirichlet_weights(&mut rng, members.len(), config.dirichlet_alpha);

    let ratings = (0..config.raters_per_item)
        .map(|r| {
            let choice = if rng.random::<f64>() < config.rater_error {
                rng.random_range(0..k)
            } else {
                members[pick_weighted(&mut rng, &weights)]
            };
            RatingRecord::new(format!("r{}", r + 1), alphabet.labels()[choice].clone())
        })
        .collect();

    let llm = if rng.random::<f64>() < config.llm_competence {
        members[pick_weighted(&mut rng, &weights)]
    } else {
        rng.random_range(0..k)
    };

    let member_labels: Vec<Label> = members
        .iter()
        .map(|&m| alphabet.labels()[m].clone())
        .collect();
    let vrs = ValidResponseSet::new(member_labels.clone()).expect("members are distinct");
    let mut item = Item::new(
        format!("sim-{index}"),
        ratings,
        alphabet.labels()[llm].clone(),
    );
    item.vrs = Some(vrs.clone());
    let truth = ItemTruth {
        vrs,
        interpretation_weights: member_labels.into_iter().zip(weights).collect(),
    };
    (item, truth)
}

/// Generates a corpus with valid response sets populated, plus the latent
/// interpretation weights. Output is identical for any thread count.
pub fn simulate_corpus(config: &SimulationConfig) -> Result<(Corpus, GroundTruth)> {
    config.validate()?;
    let alphabet = simulated_alphabet(config.alphabet_size);
    let (items, truths): (Vec<Item>, Vec<ItemTruth>) = (0..config.n_items)
        .into_par_iter()
        .map(|i| simulate_item(config, &alphabet, i))
        .unzip();
    let corpus = Corpus::new(alphabet, items)?;
    Ok((corpus, GroundTruth { items: truths }))
}

/// One simulated corpus in the sweep. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub pi: f64,
    pub replicate: usize,
    pub seed: u64,
    pub n_items: usize,
    pub realized_pi: f64,
    pub gold_concurrence: f64,
    pub true_performance: f64,
    pub prev_lower: f64,
    pub prev_upper: f64,
    pub part_lower: f64,
    pub part_upper: f64,
    pub heur_lower: f64,
    pub heur_upper: f64,
    pub mean_agreement: f64,
}

impl SweepRow {
    pub fn gap(&self) -> f64 {
        self.true_performance - self.gold_concurrence
    }

    pub fn prevalence_width(&self) -> f64 {
        self.prev_upper - self.prev_lower
    }

    pub fn partition_width(&self) -> f64 {
        self.part_upper - self.part_lower
    }

    pub fn heuristic_width(&self) -> f64 {
        self.heur_upper - self.heur_lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSummary {
    pub pi: f64,
    pub mean_gap: f64,
    pub mean_prevalence_width: f64,
    pub mean_partition_width: f64,
    pub mean_heuristic_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv emits UTF-8")
    }

    /// Per grid value averages, in grid order.
    pub fn summary(&self) -> Vec<GridSummary> {
        let mut out: Vec<(GridSummary, usize)> = Vec::new();
        for row in &self.rows {
            if out.last().is_none_or(|(s, _)| s.pi != row.pi) {
                let empty = GridSummary {
                    pi: row.pi,
                    mean_gap: 0.0,
                    mean_prevalence_width: 0.0,
                    mean_partition_width: 0.0,
                    mean_heuristic_width: 0.0,
                };
                out.push((empty, 0));
            }
            let entry = out.last_mut().expect("pushed above");
            entry.0.mean_gap += row.gap();
            entry.0.mean_prevalence_width += row.prevalence_width();
            entry.0.mean_partition_width += row.partition_width();
            entry.0.mean_heuristic_width += row.heuristic_width();
            entry.1 += 1;
        }
        out.into_iter()
            .map(|(mut s, n)| {
                let n = n as f64;
                s.mean_gap /= n;
                s.mean_prevalence_width /= n;
                s.mean_partition_width /= n;
                s.mean_heuristic_width /= n;
                s
            })
            .collect()
    }
}

fn sweep_row(
    base: &SimulationConfig,
    pi: f64,
    pi_index: usize,
    replicate: usize,
    tau: f64,
) -> Result<SweepRow> {
    let seed = rng::derive_seed(base.seed, &[pi_index as u64, replicate as u64]);
    let config = SimulationConfig {
        pi,
        seed,
        ..base.clone()
    };
    let (corpus, truth) = simulate_corpus(&config)?;
    let report = evaluate(&corpus)?;
    let realized_pi = truth.indeterminate_count() as f64 / corpus.len() as f64;
    let prev = prevalence_interval(&corpus, realized_pi)?;
    let part = partition_interval(&corpus, &oracle_partition(&corpus)?)?;
    let heur = partition_interval(
        &corpus,
        &threshold_partition(&corpus, tau, AgreementSource::Raters)?,
    )?;
    Ok(SweepRow {
        pi,
        replicate,
        seed,
        n_items: corpus.len(),
        realized_pi,
        gold_concurrence: report.gold_concurrence,
        true_performance: report
            .true_performance
            .expect("simulated corpora carry valid response sets"),
        prev_lower: prev.lower,
        prev_upper: prev.upper,
        part_lower: part.lower,
        part_upper: part.upper,
        heur_lower: heur.lower,
        heur_upper: heur.upper,
        mean_agreement: report.mean_agreement,
    })
}

/// Simulates `replicates` corpora at every grid value and scores each one.
/// Rows come back sorted by (grid position, replicate).
pub fn sweep_indeterminacy(
    base: &SimulationConfig,
    pi_grid: &[f64],
    replicates: usize,
    tau: f64,
) -> Result<SweepTable> {
    if pi_grid.is_empty() {
        return Err(invalid("pi_grid", "must not be empty"));
    }
    if replicates == 0 {
        return Err(invalid("replicates", "must be at least 1"));
    }
    crate::error::check_fraction("tau", tau)?;
    for &pi in pi_grid {
        SimulationConfig { pi, ..base.clone() }.validate()?;
    }
    let cells: Vec<(usize, usize)> = (0..pi_grid.len())
        .flat_map(|p| (0..replicates).map(move |r| (p, r)))
        .collect();
    let rows = cells
        .into_par_iter()
        .map(|(p, r)| sweep_row(base, pi_grid[p], p, r, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}
