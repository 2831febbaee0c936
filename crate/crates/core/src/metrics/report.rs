use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{f1, ic_ir, pct_return, retrieve, roc_auc};
use crate::dataset::TaskKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSpec {
    pub retrieval_fraction: f64,
    pub fee: f64,
    /// Rows per trading day. Signal return is scaled to a per-day figure and
    /// IC is computed per block of this many consecutive rows.
    pub periods_per_day: usize,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self { retrieval_fraction: 0.01, fee: 0.0, periods_per_day: 500 }
    }
}

impl MetricSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.retrieval_fraction > 0.0 && self.retrieval_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "retrieval_fraction {} outside (0, 1]",
                self.retrieval_fraction
            )));
        }
        if self.periods_per_day == 0 || !self.fee.is_finite() {
            return Err(Error::InvalidConfig("periods_per_day must be >= 1 and fee finite".into()));
        }
        Ok(())
    }
}

/// One evaluation. Metrics that do not apply (classification metrics on a
/// regression target, signal return without returns) are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub auc: f64,
    pub f1: f64,
    pub pct: f64,
    pub ic_mean: f64,
    pub ir: f64,
    pub threshold_used: f64,
    pub retrieved_count: usize,
    pub n_samples: usize,
    pub excluded_periods: usize,
}

pub const METRIC_COLUMNS: [&str; 10] = [
    "precision",
    "auc",
    "f1",
    "pct",
    "ic_mean",
    "ir",
    "threshold_used",
    "retrieved_count",
    "n_samples",
    "excluded_periods",
];

impl EvalReport {
    /// Value of a metric by its column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "precision" => self.precision,
            "auc" => self.auc,
            "f1" => self.f1,
            "pct" => self.pct,
            "ic_mean" => self.ic_mean,
            "ir" => self.ir,
            "threshold_used" => self.threshold_used,
            "retrieved_count" => self.retrieved_count as f64,
            "n_samples" => self.n_samples as f64,
            "excluded_periods" => self.excluded_periods as f64,
            _ => return None,
        })
    }

    pub fn csv_header() -> Vec<String> {
        METRIC_COLUMNS.iter().map(|s| s.to_string()).collect()
    }

    pub fn csv_row(&self) -> Vec<String> {
        METRIC_COLUMNS.iter().map(|c| self.get(c).unwrap().to_string()).collect()
    }

    /// Flat `key = value` text.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let toml_path = dir.join(format!("{stem}.toml"));
        std::fs::write(&toml_path, self.to_toml()?).map_err(|e| Error::io(&toml_path, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(Self::csv_header())?;
        w.write_record(self.csv_row())?;
        w.flush().map_err(|e| Error::io(&csv_path, e))
    }
}

/// Evaluates `scores` against `labels` and, when given, `future_returns`.
///
/// IC is computed against the returns if present, otherwise against the
/// labels; it is NaN when fewer than two blocks of rows are usable.
pub fn evaluate(
    task: TaskKind,
    scores: &[f64],
    labels: &[f64],
    future_returns: Option<&[f64]>,
    spec: &MetricSpec,
) -> Result<EvalReport> {
    spec.validate()?;
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: labels.len(), context: "labels" });
    }
    let retrieval = retrieve(scores, spec.retrieval_fraction)?;
    let (precision, auc, f1_score) = match task {
        TaskKind::BinaryClassification => {
            let auc = roc_auc(scores, labels)?;
            let tp = retrieval.retrieved.iter().filter(|&&i| labels[i] == 1.0).count() as f64;
            let positives = labels.iter().filter(|&&y| y == 1.0).count() as f64;
            let precision = tp / retrieval.retrieved.len() as f64;
            (precision, auc, f1(precision, tp / positives))
        }
        TaskKind::Regression => (f64::NAN, f64::NAN, f64::NAN),
    };
    let pct = match future_returns {
        Some(r) => pct_return(scores, r, spec.retrieval_fraction, spec.periods_per_day, spec.fee)?,
        None => f64::NAN,
    };
    let truths = future_returns.unwrap_or(labels);
    let (ic_mean, ir, excluded_periods) = match ic_blocks(scores, truths, spec.periods_per_day) {
        Some((p, t)) => match ic_ir(&p, &t) {
            Ok(s) => (s.ic_mean, s.ir, s.excluded_periods),
            Err(e) => {
                log::warn!("IC not computed: {e}");
                (f64::NAN, f64::NAN, p.len())
            }
        },
        None => (f64::NAN, f64::NAN, 0),
    };
    Ok(EvalReport {
        precision,
        auc,
        f1: f1_score,
        pct,
        ic_mean,
        ir,
        threshold_used: retrieval.threshold,
        retrieved_count: retrieval.retrieved.len(),
        n_samples: scores.len(),
        excluded_periods,
    })
}

type Blocks = Vec<Vec<f64>>;

/// Consecutive blocks of `size` rows; a short tail joins the previous block.
fn ic_blocks(scores: &[f64], truths: &[f64], size: usize) -> Option<(Blocks, Blocks)> {
    let mut bounds: Vec<(usize, usize)> =
        (0..scores.len()).step_by(size).map(|s| (s, (s + size).min(scores.len()))).collect();
    if bounds.len() >= 2 && bounds.last().unwrap().1 - bounds.last().unwrap().0 < 3 {
        let (_, end) = bounds.pop().unwrap();
        bounds.last_mut().unwrap().1 = end;
    }
    if bounds.len() < 2 {
        return None;
    }
    let cut = |v: &[f64]| bounds.iter().map(|&(s, e)| v[s..e].to_vec()).collect();
    Some((cut(scores), cut(truths)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_report() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let labels: Vec<f64> = (0..100).map(|i| f64::from(i >= 50)).collect();
        let spec = MetricSpec { retrieval_fraction: 0.1, periods_per_day: 25, fee: 0.0 };
        let r = evaluate(TaskKind::BinaryClassification, &scores, &labels, Some(&scores), &spec).unwrap();
        assert_eq!((r.precision, r.auc, r.retrieved_count), (1.0, 1.0, 10));
        assert!((r.f1 - 2.0 * 0.2 / 1.2).abs() < 1e-15);
        assert_eq!((r.ic_mean, r.ir), (1.0, f64::INFINITY));
        assert!(r.to_toml().unwrap().contains("auc = 1.0"));
        assert_eq!(r.csv_row().len(), EvalReport::csv_header().len());
    }

    #[test]
    fn regression_skips_classification_metrics() {
        let scores = [0.3, 0.1, 0.2, 0.5, 0.4, 0.0];
        let r = evaluate(TaskKind::Regression, &scores, &scores, None, &MetricSpec::default()).unwrap();
        assert!(r.auc.is_nan() && r.pct.is_nan() && r.ic_mean.is_nan());
    }

    #[test]
    fn short_tail_merges() {
        let v: Vec<f64> = (0..11).map(f64::from).collect();
        let (p, _) = ic_blocks(&v, &v, 5).unwrap();
        assert_eq!(p.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 6]);
    }
}
