//! Fully connected perceptron with tanh hidden layers trained by mini-batch
//! SGD at a constant learning rate.
//!
//! Inputs are standardized with the weighted mean and standard deviation of
//! the training rows. Each mini-batch gradient is the weight-normalized mean
//! of per-sample gradients, so integer weights behave like replicated rows
//! under full-batch training.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::sigmoid;
use super::{BaseLearner, CurveRecorder, Predictor};
use crate::dataset::TaskKind;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    /// Rows per gradient step; at least `N` means full-batch descent.
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden_sizes: vec![64, 64], learning_rate: 0.05, batch_size: 128 }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) || self.batch_size == 0 {
            return Err(Error::InvalidConfig("mlp layer sizes and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mlp learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
    pub input_mean: Array1<f64>,
    pub input_scale: Array1<f64>,
    pub task: TaskKind,
}

struct Activations {
    /// Input to every layer, then the final pre-activation output.
    layers: Vec<Array2<f64>>,
}

impl MlpModel {
    fn standardize(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.input_mean) / &self.input_scale
    }

    fn forward(&self, input: Array2<f64>) -> Activations {
        let mut layers = Vec::with_capacity(self.layers.len() + 1);
        let mut a = input;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights) + &layer.bias;
            if k < last {
                z.mapv_inplace(f64::tanh);
            }
            layers.push(a);
            a = z;
        }
        layers.push(a);
        Activations { layers }
    }

    fn output(&self, raw: f64) -> f64 {
        match self.task {
            TaskKind::Regression => raw,
            TaskKind::BinaryClassification => sigmoid(raw),
        }
    }

    /// One SGD step on `batch` rows of the standardized inputs.
    fn step(&mut self, x: &Array2<f64>, labels: &[f64], weights: &[f64], batch: &[usize], lr: f64) {
        let input = x.select(Axis(0), batch);
        let acts = self.forward(input);
        let out = acts.layers.last().expect("output layer");
        let total_w: f64 = batch.iter().map(|&i| weights[i]).sum();
        if total_w <= 0.0 {
            return;
        }
        // d(loss)/d(raw output) per row, already weight-normalized.
        let mut delta = Array2::from_shape_fn((batch.len(), 1), |(r, _)| {
            let i = batch[r];
            let raw = out[[r, 0]];
            let d = match self.task {
                TaskKind::Regression => 2.0 * (raw - labels[i]),
                TaskKind::BinaryClassification => sigmoid(raw) - labels[i],
            };
            d * weights[i] / total_w
        });
        for k in (0..self.layers.len()).rev() {
            let a_prev = &acts.layers[k];
            let grad_w = a_prev.t().dot(&delta);
            let grad_b = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weights.t());
                back.zip_mut_with(a_prev, |d, &a| *d *= 1.0 - a * a);
                delta = back;
            }
            let layer = &mut self.layers[k];
            layer.weights.scaled_add(-lr, &grad_w);
            layer.bias.scaled_add(-lr, &grad_b);
        }
    }

    fn predict_standardized(&self, x: Array2<f64>) -> Vec<f64> {
        let acts = self.forward(x);
        acts.layers
            .last()
            .expect("output layer")
            .column(0)
            .iter()
            .map(|&raw| self.output(raw))
            .collect()
    }
}

impl Predictor for MlpModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self.predict_standardized(self.standardize(x))
    }
}

fn weighted_moments(x: ArrayView2<'_, f64>, weights: &[f64]) -> (Array1<f64>, Array1<f64>) {
    let total: f64 = weights.iter().sum();
    let w = Array1::from(weights.to_vec());
    let mean = x.t().dot(&w) / total;
    let var = x
        .columns()
        .into_iter()
        .zip(&mean)
        .map(|(c, m)| c.iter().zip(weights).map(|(v, w)| w * (v - m).powi(2)).sum::<f64>() / total)
        .collect::<Array1<f64>>();
    let scale = var.mapv(|v| if v > 1e-24 { v.sqrt() } else { 1.0 });
    (mean, scale)
}

impl BaseLearner for MlpParams {
    type Model = MlpModel;

    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[f64],
        weights: &[f64],
        task: TaskKind,
        iterations: usize,
        seed: u64,
        curves: &mut CurveRecorder<'_>,
    ) -> Result<MlpModel> {
        self.validate()?;
        let mut rng = seed::rng(seed, &[]);
        let (input_mean, input_scale) = weighted_moments(x, weights);
        let mut sizes = vec![x.ncols()];
        sizes.extend(&self.hidden_sizes);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|io| {
                let bound = (6.0 / (io[0] + io[1]) as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((io[0], io[1]), || {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::zeros(io[1]),
                }
            })
            .collect();
        let mut model = MlpModel { layers, input_mean, input_scale, task };
        let xs = model.standardize(x);
        let n = x.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        let full_batch = self.batch_size >= n;
        for _ in 0..iterations {
            if !full_batch {
                order.shuffle(&mut rng);
            }
            for batch in order.chunks(self.batch_size) {
                model.step(&xs, labels, weights, batch, self.learning_rate);
            }
            let predictions = model.predict_standardized(xs.clone());
            if !curves.record(&predictions)? {
                break;
            }
        }
        Ok(model)
    }
}
