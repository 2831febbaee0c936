use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::loss::sample_loss;
use crate::dataset::TaskKind;
use crate::error::{Error, Result};

/// Unweighted training loss of every sample after every iteration,
/// `N` rows by `T` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    values: Array2<f64>,
}

impl LossCurves {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::InvalidConfig("loss curves need at least one sample and one iteration".into()));
        }
        if let Some(((i, t), v)) = values.indexed_iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NonFinite {
                what: "loss curves",
                detail: format!("sample {i}, iteration {t} = {v}"),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_iterations(&self) -> usize {
        self.values.ncols()
    }
}

/// Stop once the weighted training loss has failed to improve by
/// `min_delta` for `patience` consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
}

/// Collects one loss column per training iteration.
///
/// Learners hand over their current predictions on the training rows (in
/// output space: probabilities for classification) after every iteration.
pub struct CurveRecorder<'a> {
    labels: &'a [f64],
    weights: &'a [f64],
    task: TaskKind,
    columns: Vec<Vec<f64>>,
    early_stopping: Option<EarlyStopping>,
    best: f64,
    stale: usize,
}

impl<'a> CurveRecorder<'a> {
    pub fn new(
        labels: &'a [f64],
        weights: &'a [f64],
        task: TaskKind,
        early_stopping: Option<EarlyStopping>,
    ) -> Self {
        Self {
            labels,
            weights,
            task,
            columns: Vec::new(),
            early_stopping,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records one iteration. Returns `false` when early stopping asks the
    /// learner to stop.
    pub fn record(&mut self, predictions: &[f64]) -> Result<bool> {
        debug_assert_eq!(predictions.len(), self.labels.len());
        let iteration = self.columns.len() + 1;
        let mut column = Vec::with_capacity(predictions.len());
        for (sample, (&p, &y)) in predictions.iter().zip(self.labels).enumerate() {
            let l = sample_loss(self.task, p, y);
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss { iteration, sample });
            }
            column.push(l);
        }
        let keep_going = match self.early_stopping {
            None => true,
            Some(es) => {
                let total: f64 = self.weights.iter().sum();
                let objective =
                    column.iter().zip(self.weights).map(|(l, w)| l * w).sum::<f64>() / total;
                if objective < self.best - es.min_delta {
                    self.best = objective;
                    self.stale = 0;
                } else {
                    self.stale += 1;
                }
                self.stale < es.patience.max(1)
            }
        };
        self.columns.push(column);
        Ok(keep_going)
    }

    pub fn iterations(&self) -> usize {
        self.columns.len()
    }

    pub fn finish(self) -> Result<LossCurves> {
        let n = self.labels.len();
        let t = self.columns.len();
        LossCurves::new(Array2::from_shape_fn((n, t), |(i, j)| self.columns[j][i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_columns_in_order() {
        let y = [0.0, 1.0];
        let w = [1.0, 1.0];
        let mut rec = CurveRecorder::new(&y, &w, TaskKind::Regression, None);
        rec.record(&[1.0, 1.0]).unwrap();
        rec.record(&[0.0, 3.0]).unwrap();
        let c = rec.finish().unwrap();
        assert_eq!(c.values(), &ndarray::array![[1.0, 0.0], [0.0, 4.0]]);
    }

    #[test]
    fn non_finite_loss_names_iteration() {
        let y = [0.0];
        let w = [1.0];
        let mut rec = CurveRecorder::new(&y, &w, TaskKind::Regression, None);
        rec.record(&[1.0]).unwrap();
        let err = rec.record(&[f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { iteration: 2, sample: 0 }));
    }

    #[test]
    fn early_stopping_after_patience() {
        let y = [0.0];
        let w = [1.0];
        let es = EarlyStopping { patience: 2, min_delta: 0.0 };
        let mut rec = CurveRecorder::new(&y, &w, TaskKind::Regression, Some(es));
        assert!(rec.record(&[2.0]).unwrap());
        assert!(rec.record(&[1.0]).unwrap());
        assert!(rec.record(&[1.0]).unwrap());
        assert!(!rec.record(&[1.5]).unwrap());
        assert_eq!(rec.finish().unwrap().n_iterations(), 4);
    }
}
