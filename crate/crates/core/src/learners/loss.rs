//! Per-sample losses shared by training, loss-curve recording and evaluation.

use crate::dataset::TaskKind;

/// Scores are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const LOG_LOSS_EPS: f64 = 1e-12;

pub fn squared_error(prediction: f64, label: f64) -> f64 {
    let r = prediction - label;
    r * r
}

pub fn log_loss(score: f64, label: f64) -> f64 {
    let p = score.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

pub fn sample_loss(task: TaskKind, prediction: f64, label: f64) -> f64 {
    match task {
        TaskKind::Regression => squared_error(prediction, label),
        TaskKind::BinaryClassification => log_loss(prediction, label),
    }
}

pub fn sample_losses(task: TaskKind, predictions: &[f64], labels: &[f64]) -> Vec<f64> {
    predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| sample_loss(task, p, y))
        .collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
