//! L2-regularized linear model.
//!
//! Regression minimizes the weighted mean squared error plus
//! `l2 * |coefficients|^2` (intercept unpenalized). Iterations `1..T-1` are
//! conjugate-gradient iterates on the normal equations and iteration `T` is
//! the exact solution, so the loss curve is informative while the final fit
//! is closed-form. Classification runs `T` Newton steps on the penalized
//! weighted log-loss. Weights are normalized to sum to one, which makes the
//! fit invariant to weight scale.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::loss::sigmoid;
use super::{normalized, BaseLearner, CurveRecorder, Predictor};
use crate::dataset::TaskKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeParams {
    pub l2: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self { l2: 1e-3 }
    }
}

impl RidgeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidConfig(format!("ridge l2 must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub task: TaskKind,
}

impl RidgeModel {
    fn from_beta(beta: &DVector<f64>, task: TaskKind) -> Self {
        Self { intercept: beta[0], coefficients: beta.iter().skip(1).copied().collect(), task }
    }
}

impl Predictor for RidgeModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let raw = self.intercept
                    + row.iter().zip(&self.coefficients).map(|(v, c)| v * c).sum::<f64>();
                match self.task {
                    TaskKind::Regression => raw,
                    TaskKind::BinaryClassification => sigmoid(raw),
                }
            })
            .collect()
    }
}

/// Design matrix with a leading column of ones.
fn design(x: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] })
}

fn weighted_gram(z: &DMatrix<f64>, w: &[f64], l2: f64) -> DMatrix<f64> {
    let mut scaled = z.clone();
    for (i, &wi) in w.iter().enumerate() {
        scaled.row_mut(i).scale_mut(wi);
    }
    let mut a = z.transpose() * scaled;
    for j in 1..a.ncols() {
        a[(j, j)] += l2;
    }
    a
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(b, eps)
        .map_err(|e| Error::NonFinite { what: "ridge solve", detail: e.to_string() })
}

impl BaseLearner for RidgeParams {
    type Model = RidgeModel;

    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[f64],
        weights: &[f64],
        task: TaskKind,
        iterations: usize,
        _seed: u64,
        curves: &mut CurveRecorder<'_>,
    ) -> Result<RidgeModel> {
        self.validate()?;
        let z = design(x);
        let w = normalized(weights);
        let y = DVector::from_column_slice(labels);
        let record = |beta: &DVector<f64>, curves: &mut CurveRecorder<'_>| {
            curves.record(&RidgeModel::from_beta(beta, task).predict(x))
        };
        match task {
            TaskKind::Regression => {
                let a = weighted_gram(&z, &w, self.l2);
                let wy = DVector::from_iterator(y.len(), y.iter().zip(&w).map(|(y, w)| y * w));
                let b = z.transpose() * wy;
                let mut beta = DVector::zeros(b.len());
                let mut r = b.clone();
                let mut d = r.clone();
                for _ in 1..iterations {
                    let ad = &a * &d;
                    let curvature = d.dot(&ad);
                    let rr = r.dot(&r);
                    if curvature > f64::MIN_POSITIVE && rr > 0.0 {
                        let alpha = rr / curvature;
                        beta.axpy(alpha, &d, 1.0);
                        r.axpy(-alpha, &ad, 1.0);
                        let ratio = r.dot(&r) / rr;
                        d = &r + &d * ratio;
                    }
                    if !record(&beta, curves)? {
                        return Ok(RidgeModel::from_beta(&beta, task));
                    }
                }
                let beta = solve(&a, &b)?;
                record(&beta, curves)?;
                Ok(RidgeModel::from_beta(&beta, task))
            }
            TaskKind::BinaryClassification => {
                let mean_y: f64 = labels.iter().zip(&w).map(|(y, w)| y * w).sum();
                let p0 = mean_y.clamp(1e-6, 1.0 - 1e-6);
                let mut beta = DVector::zeros(z.ncols());
                beta[0] = (p0 / (1.0 - p0)).ln();
                for _ in 0..iterations {
                    let p = (&z * &beta).map(sigmoid);
                    let resid = DVector::from_fn(p.len(), |i, _| w[i] * (p[i] - labels[i]));
                    let mut grad = z.transpose() * resid;
                    for j in 1..grad.len() {
                        grad[j] += self.l2 * beta[j];
                    }
                    let curv: Vec<f64> =
                        p.iter().zip(&w).map(|(p, w)| w * (p * (1.0 - p)).max(1e-16)).collect();
                    let hess = weighted_gram(&z, &curv, self.l2);
                    beta -= solve(&hess, &grad)?;
                    if !record(&beta, curves)? {
                        break;
                    }
                }
                Ok(RidgeModel::from_beta(&beta, task))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn fit(x: &Array2<f64>, y: &[f64], w: &[f64], task: TaskKind, l2: f64, t: usize) -> (RidgeModel, super::super::LossCurves) {
        let mut rec = CurveRecorder::new(y, w, task, None);
        let m = RidgeParams { l2 }.fit(x.view(), y, w, task, t, 0, &mut rec).unwrap();
        (m, rec.finish().unwrap())
    }

    #[test]
    fn recovers_exact_linear_coefficient() {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64 / 7.0);
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.75 * v - 1.5).collect();
        let (m, curves) = fit(&x, &y, &vec![1.0; 40], TaskKind::Regression, 0.0, 5);
        assert!((m.coefficients[0] - 2.75).abs() < 1e-8, "{}", m.coefficients[0]);
        assert!((m.intercept + 1.5).abs() < 1e-8);
        assert_eq!(curves.n_iterations(), 5);
    }

    #[test]
    fn constant_labels_give_constant_prediction() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| ((i * 3 + j) % 5) as f64);
        let y = vec![4.25; 20];
        let (m, _) = fit(&x, &y, &[1.0; 20], TaskKind::Regression, 0.0, 1);
        for p in m.predict(x.view()) {
            assert!((p - 4.25).abs() < 1e-9);
        }
    }

    #[test]
    fn conjugate_gradient_path_decreases_weighted_loss() {
        let x = Array2::from_shape_fn((50, 4), |(i, j)| ((i * (j + 2)) % 11) as f64 / 11.0);
        let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] - 2.0 * r[1] + 0.5 * r[3]).collect();
        let (_, curves) = fit(&x, &y, &vec![1.0; 50], TaskKind::Regression, 1e-6, 6);
        let means: Vec<f64> = (0..6).map(|t| curves.values().column(t).mean().unwrap()).collect();
        for pair in means.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{means:?}");
        }
    }

    #[test]
    fn logistic_newton_reduces_log_loss() {
        let x = Array2::from_shape_fn((60, 1), |(i, _)| i as f64 / 60.0);
        let y: Vec<f64> = (0..60).map(|i| f64::from(u8::from((i * 7) % 60 < 2 * i.min(30)))).collect();
        let (m, curves) = fit(&x, &y, &vec![1.0; 60], TaskKind::BinaryClassification, 1e-2, 8);
        let first = curves.values().column(0).mean().unwrap();
        let last = curves.values().column(7).mean().unwrap();
        assert!(last <= first);
        assert!(m.predict(x.view()).iter().all(|&p| p > 0.0 && p < 1.0));
    }
}
