//! Retrieval metrics (precision, F1, signal return), ROC AUC and
//! rank-correlation statistics, plus the flat [`EvalReport`].

mod ic;
mod report;

pub use ic::{ic_ir, spearman, IcSummary};
pub use report::{evaluate, EvalReport, MetricSpec, METRIC_COLUMNS};

use crate::dataset::noise::ceil_count;
use crate::error::{Error, Result};

/// Samples scoring at or above the `ceil(fraction * N)`-th largest score.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub threshold: f64,
    pub retrieved: Vec<usize>,
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Metric("no samples".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric("non-finite score".into()));
    }
    Ok(())
}

fn check_labels(scores: &[f64], labels: &[f64]) -> Result<()> {
    check_scores(scores)?;
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: labels.len(), context: "labels" });
    }
    match labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        Some(y) => Err(Error::Metric(format!("label {y} is not 0 or 1"))),
        None => Ok(()),
    }
}

pub fn retrieve(scores: &[f64], fraction: f64) -> Result<Retrieval> {
    check_scores(scores)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Metric(format!("retrieval fraction {fraction} outside (0, 1]")));
    }
    let k = ceil_count(fraction, scores.len());
    if k == 0 {
        return Err(Error::Metric("retrieval fraction selects no samples".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k - 1];
    let retrieved = (0..scores.len()).filter(|&i| scores[i] >= threshold).collect();
    Ok(Retrieval { threshold, retrieved })
}

/// Precision of the top `fraction` of scores, with the threshold used.
pub fn precision_at_fraction(scores: &[f64], labels: &[f64], fraction: f64) -> Result<(f64, f64)> {
    check_labels(scores, labels)?;
    let r = retrieve(scores, fraction)?;
    let tp = r.retrieved.iter().filter(|&&i| labels[i] == 1.0).count();
    Ok((tp as f64 / r.retrieved.len() as f64, r.threshold))
}

pub fn f1_at_fraction(scores: &[f64], labels: &[f64], fraction: f64) -> Result<f64> {
    check_labels(scores, labels)?;
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 {
        return Err(Error::Metric("F1 needs at least one positive label".into()));
    }
    let r = retrieve(scores, fraction)?;
    let tp = r.retrieved.iter().filter(|&&i| labels[i] == 1.0).count();
    Ok(f1(tp as f64 / r.retrieved.len() as f64, tp as f64 / positives as f64))
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Area under the ROC curve as the Mann-Whitney statistic
/// `P(s+ > s-) + 0.5 P(s+ = s-)`.
///
/// Pairs are counted in integer half-units, so the result is exactly
/// `(wins + 0.5 ties) / (positives * negatives)` rounded once.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_labels(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut negatives_below, mut half_units) = (0u128, 0u128);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let pos = order[start..end].iter().filter(|&&i| labels[i] == 1.0).count() as u128;
        let neg = (end - start) as u128 - pos;
        half_units += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        start = end;
    }
    let negatives = negatives_below;
    let positives = scores.len() as u128 - negatives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric("AUC needs both positive and negative labels".into()));
    }
    Ok(half_units as f64 / (2 * positives * negatives) as f64)
}

/// Per-day return of following the top `fraction` of signals.
///
/// `periods_per_day` rows make up one day, so `trades_per_day` is the
/// retrieved count divided by `N / periods_per_day`; the result is
/// `mean(retrieved returns) * trades_per_day - fee * trades_per_day`.
pub fn pct_return(
    scores: &[f64],
    future_returns: &[f64],
    fraction: f64,
    periods_per_day: usize,
    fee: f64,
) -> Result<f64> {
    if future_returns.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: future_returns.len(),
            context: "future returns",
        });
    }
    if periods_per_day == 0 {
        return Err(Error::Metric("periods_per_day must be >= 1".into()));
    }
    let r = retrieve(scores, fraction)?;
    let count = r.retrieved.len() as f64;
    let mean = r.retrieved.iter().map(|&i| future_returns[i]).sum::<f64>() / count;
    let days = scores.len() as f64 / periods_per_day as f64;
    let trades_per_day = count / days;
    Ok(mean * trades_per_day - fee * trades_per_day)
}
