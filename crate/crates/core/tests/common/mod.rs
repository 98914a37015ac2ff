//! Test-only reference routines. Nothing here calls the scoring code under
//! test: gold labels are recounted by hand and interval endpoints come from
//! enumerating every valid-response-set assignment.

#![allow(dead_code)]

use std::collections::BTreeSet;

use indeterminacy::{
    Corpus, Item, Label, LabelAlphabet, Partition, RatingRecord, ValidResponseSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small corpus described by alphabet indices. Sets are bitmasks.
#[derive(Debug, Clone)]
pub struct Case {
    pub k: usize,
    pub items: Vec<CaseItem>,
}

#[derive(Debug, Clone)]
pub struct CaseItem {
    pub ratings: Vec<usize>,
    pub llm: usize,
    pub vrs: Option<u32>,
    /// Side of the partition under test.
    pub in_indeterminate_side: bool,
}

pub fn label(i: usize) -> Label {
    Label::new(format!("L{i}")).unwrap()
}

impl Case {
    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn corpus(&self) -> Corpus {
        let alphabet = LabelAlphabet::new((0..self.k).map(label).collect()).unwrap();
        let items = self
            .items
            .iter()
            .enumerate()
            .map(|(idx, it)| {
                let ratings = it
                    .ratings
                    .iter()
                    .enumerate()
                    .map(|(r, &x)| RatingRecord::new(format!("r{r}"), label(x)))
                    .collect();
                let mut item = Item::new(format!("item{idx}"), ratings, label(it.llm));
                item.vrs = it.vrs.map(|mask| {
                    ValidResponseSet::new(
                        (0..self.k)
                            .filter(|b| mask >> b & 1 == 1)
                            .map(label)
                            .collect(),
                    )
                    .unwrap()
                });
                item
            })
            .collect();
        Corpus::new(alphabet, items).unwrap()
    }

    pub fn partition(&self) -> Partition {
        let mut d = BTreeSet::new();
        let mut i = BTreeSet::new();
        for (idx, it) in self.items.iter().enumerate() {
            let id = format!("item{idx}");
            if it.in_indeterminate_side {
                i.insert(id);
            } else {
                d.insert(id);
            }
        }
        Partition::new(d, i).unwrap()
    }
}

/// Most frequent index; lowest index wins ties.
pub fn oracle_gold(ratings: &[usize], k: usize) -> usize {
    let mut best = 0;
    let mut best_count = 0;
    for candidate in 0..k {
        let count = ratings.iter().filter(|&&r| r == candidate).count();
        if count > best_count {
            best = candidate;
            best_count = count;
        }
    }
    best
}

pub fn oracle_gold_matches(case: &Case) -> usize {
    case.items
        .iter()
        .filter(|it| oracle_gold(&it.ratings, case.k) == it.llm)
        .count()
}

pub fn oracle_in_vrs(case: &Case) -> usize {
    case.items
        .iter()
        .filter(|it| it.vrs.expect("full vrs") >> it.llm & 1 == 1)
        .count()
}

fn subsets_containing(k: usize, member: usize) -> Vec<u32> {
    (1u32..(1 << k)).filter(|m| m >> member & 1 == 1).collect()
}

/// Calls `visit` with every combination of one choice per slot.
fn for_each_assignment(choices: &[Vec<u32>], visit: &mut dyn FnMut(&[u32])) {
    fn go(choices: &[Vec<u32>], acc: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
        if acc.len() == choices.len() {
            visit(acc);
            return;
        }
        for &c in &choices[acc.len()] {
            acc.push(c);
            go(choices, acc, visit);
            acc.pop();
        }
    }
    go(choices, &mut Vec::new(), visit);
}

fn correct_count(case: &Case, masks: &[u32]) -> usize {
    case.items
        .iter()
        .zip(masks)
        .filter(|(it, m)| *m >> it.llm & 1 == 1)
        .count()
}

/// Min and max correct-count over VRS assignments containing the gold label
/// with at most `max_indeterminate` sets of size two or more.
pub fn oracle_prevalence_counts(case: &Case, max_indeterminate: usize) -> (usize, usize) {
    let choices: Vec<Vec<u32>> = case
        .items
        .iter()
        .map(|it| subsets_containing(case.k, oracle_gold(&it.ratings, case.k)))
        .collect();
    let mut lo = usize::MAX;
    let mut hi = 0;
    for_each_assignment(&choices, &mut |masks| {
        let indeterminate = masks.iter().filter(|m| m.count_ones() >= 2).count();
        if indeterminate <= max_indeterminate {
            let c = correct_count(case, masks);
            lo = lo.min(c);
            hi = hi.max(c);
        }
    });
    (lo, hi)
}

/// Min and max correct-count when the determinate side holds only the gold
/// singleton and the other side any set containing gold. With
/// `use_known_vrs`, items carrying a set keep it.
pub fn oracle_partition_counts(case: &Case, use_known_vrs: bool) -> (usize, usize) {
    let choices: Vec<Vec<u32>> = case
        .items
        .iter()
        .map(|it| {
            let gold = oracle_gold(&it.ratings, case.k);
            match (use_known_vrs, it.vrs) {
                (true, Some(mask)) => vec![mask],
                _ if it.in_indeterminate_side => subsets_containing(case.k, gold),
                _ => vec![1 << gold],
            }
        })
        .collect();
    let mut lo = usize::MAX;
    let mut hi = 0;
    for_each_assignment(&choices, &mut |masks| {
        let c = correct_count(case, masks);
        lo = lo.min(c);
        hi = hi.max(c);
    });
    (lo, hi)
}

/// Random case with `n_max` items at most and alphabet size 2..=k_max.
/// Every item gets a random non-empty VRS; `gold_in_vrs` forces the
/// recounted gold label into it.
pub fn random_case(rng: &mut ChaCha8Rng, n_max: usize, k_max: usize, gold_in_vrs: bool) -> Case {
    let k = rng.random_range(2..=k_max);
    let n = rng.random_range(1..=n_max);
    let items = (0..n)
        .map(|_| {
            let ratings: Vec<usize> = (0..rng.random_range(1..=4))
                .map(|_| rng.random_range(0..k))
                .collect();
            let mut mask = rng.random_range(1u32..(1 << k));
            if gold_in_vrs {
                mask |= 1 << oracle_gold(&ratings, k);
            }
            CaseItem {
                llm: rng.random_range(0..k),
                ratings,
                vrs: Some(mask),
                in_indeterminate_side: rng.random_bool(0.5),
            }
        })
        .collect();
    Case { k, items }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
