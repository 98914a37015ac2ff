//! Estimating the share of indeterminate items from a random audit.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{prevalence_interval, PerformanceInterval};
use crate::corpus::{AuditRecord, Corpus};
use crate::error::{Error, Result};

const BISECTION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceEstimate {
    pub n_audited: usize,
    pub n_indeterminate: usize,
    pub point: f64,
    pub upper_confidence: f64,
    pub alpha: f64,
}

/// Draws `n` distinct item ids uniformly without replacement. The result
/// depends only on the seed, the corpus order and `n`.
pub fn draw_audit_sample(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<String>> {
    if n == 0 || n > corpus.len() {
        return Err(Error::InvalidSampleSize {
            requested: n,
            available: corpus.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, corpus.len(), n)
        .into_iter()
        .map(|i| corpus.items()[i].item_id.clone())
        .collect())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "alpha",
            range: "(0, 1)",
            value: alpha,
        })
    }
}

/// P(X <= k) for X ~ Binomial(n, p), summed in log space.
pub fn binomial_cdf(k: usize, n: usize, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let mut ln_choose = 0.0;
    let mut terms = Vec::with_capacity(k + 1);
    for i in 0..=k {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        terms.push(ln_choose + i as f64 * ln_p + (n - i) as f64 * ln_q);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

/// One-sided exact upper confidence limit: the largest `p` with
/// `P(X <= k | n, p) >= alpha`.
pub fn clopper_pearson_upper(k: usize, n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::EmptyAudits);
    }
    if k >= n {
        return Ok(1.0);
    }
    // The CDF is strictly decreasing in p on (0, 1).
    let (mut lo, mut hi) = (k as f64 / n as f64, 1.0);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if binomial_cdf(k, n, mid) >= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn estimate_prevalence(audits: &[AuditRecord], alpha: f64) -> Result<PrevalenceEstimate> {
    check_alpha(alpha)?;
    if audits.is_empty() {
        return Err(Error::EmptyAudits);
    }
    let n = audits.len();
    let k = audits.iter().filter(|a| a.indeterminate).count();
    Ok(PrevalenceEstimate {
        n_audited: n,
        n_indeterminate: k,
        point: k as f64 / n as f64,
        upper_confidence: clopper_pearson_upper(k, n, alpha)?,
        alpha,
    })
}

/// Prevalence interval evaluated at the estimate's upper confidence limit.
pub fn widened_prevalence_interval(
    corpus: &Corpus,
    estimate: &PrevalenceEstimate,
) -> Result<PerformanceInterval> {
    let interval = prevalence_interval(corpus, estimate.upper_confidence)?;
    Ok(interval.with_assumption(format!("audit-confidence:{}", 1.0 - estimate.alpha)))
}
