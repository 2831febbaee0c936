//! Base learners that accept per-sample weights and a feature subset and
//! record a per-sample loss curve while they train.
//!
//! An *iteration* is one boosted tree for [`gbdt`], one epoch for [`mlp`],
//! and one solver step for [`ridge`]. The contract every learner honours is
//! [`BaseLearner`]; [`train`] dispatches on a [`LearnerConfig`] and wraps the
//! fitted parameters into a serializable [`TrainedModel`].

mod curves;
pub mod gbdt;
pub mod loss;
pub mod mlp;
pub mod ridge;

pub use curves::{CurveRecorder, EarlyStopping, LossCurves};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TaskKind};
use crate::error::{Error, Result};

/// A learner that fits on an already column-restricted matrix.
pub trait BaseLearner {
    type Model: Predictor;

    /// Fits `iterations` rounds, calling `curves.record` after each one and
    /// stopping early if it returns `false`.
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[f64],
        weights: &[f64],
        task: TaskKind,
        iterations: usize,
        seed: u64,
        curves: &mut CurveRecorder<'_>,
    ) -> Result<Self::Model>;
}

/// Predictions in output space: probabilities for classification, raw
/// values for regression.
pub trait Predictor {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Gbdt,
    Mlp,
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub iterations: usize,
    pub gbdt: gbdt::GbdtParams,
    pub mlp: mlp::MlpParams,
    pub ridge: ridge::RidgeParams,
    pub early_stopping: Option<EarlyStopping>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Gbdt,
            iterations: 200,
            gbdt: Default::default(),
            mlp: Default::default(),
            ridge: Default::default(),
            early_stopping: None,
        }
    }
}

impl LearnerConfig {
    pub fn gbdt(iterations: usize, params: gbdt::GbdtParams) -> Self {
        Self { kind: LearnerKind::Gbdt, iterations, gbdt: params, ..Default::default() }
    }

    pub fn mlp(iterations: usize, params: mlp::MlpParams) -> Self {
        Self { kind: LearnerKind::Mlp, iterations, mlp: params, ..Default::default() }
    }

    pub fn ridge(iterations: usize, params: ridge::RidgeParams) -> Self {
        Self { kind: LearnerKind::Ridge, iterations, ridge: params, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.iterations == 0 {
            return bad("learner iterations must be >= 1".into());
        }
        match self.kind {
            LearnerKind::Gbdt => self.gbdt.validate(),
            LearnerKind::Mlp => self.mlp.validate(),
            LearnerKind::Ridge => self.ridge.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Gbdt(gbdt::GbdtModel),
    Mlp(mlp::MlpModel),
    Ridge(ridge::RidgeModel),
}

/// A fitted sub-model. Consumes full-width rows and reads only
/// `feature_subset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub feature_subset: Vec<usize>,
    pub n_features: usize,
    pub task: TaskKind,
}

const MODEL_FORMAT: &str = "double-ensemble/trained-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

impl TrainedModel {
    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if rows.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: rows.ncols(),
                context: "feature columns",
            });
        }
        let x = restrict(rows, &self.feature_subset);
        let x = x.view();
        Ok(match &self.params {
            ModelParams::Gbdt(m) => m.predict(x),
            ModelParams::Mlp(m) => m.predict(x),
            ModelParams::Ridge(m) => m.predict(x),
        })
    }

    /// Versioned JSON; floats round-trip bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&Envelope {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self,
        })
        .map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope<Self> =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported model format {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.model)
    }
}

fn restrict(rows: ArrayView2<'_, f64>, subset: &[usize]) -> Array2<f64> {
    if subset.len() == rows.ncols() && subset.iter().enumerate().all(|(i, &j)| i == j) {
        rows.to_owned()
    } else {
        rows.select(Axis(1), subset)
    }
}

fn validate_inputs(d: &Dataset, weights: &[f64], subset: &[usize]) -> Result<()> {
    if weights.len() != d.n_samples() {
        return Err(Error::DimensionMismatch {
            expected: d.n_samples(),
            found: weights.len(),
            context: "sample weights",
        });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidConfig(format!("sample weights must be finite and >= 0, got {w}")));
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::InvalidConfig("all sample weights are zero".into()));
    }
    if subset.is_empty() {
        return Err(Error::InvalidConfig("empty feature subset".into()));
    }
    let mut seen = vec![false; d.n_features()];
    for &j in subset {
        if j >= d.n_features() {
            return Err(Error::InvalidConfig(format!(
                "feature index {j} out of range for {} features",
                d.n_features()
            )));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidConfig(format!("feature index {j} repeated in subset")));
        }
    }
    Ok(())
}

/// Fits one sub-model on `d` with per-sample `weights`, reading only the
/// columns in `feature_subset`.
///
/// The model minimizes the weighted loss (squared error, or log-loss of a
/// sigmoid output for classification) while the returned curves hold the
/// unweighted per-sample training loss after each iteration.
pub fn train(
    d: &Dataset,
    weights: &[f64],
    feature_subset: &[usize],
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<(TrainedModel, LossCurves)> {
    cfg.validate()?;
    validate_inputs(d, weights, feature_subset)?;
    let x = restrict(d.features(), feature_subset);
    let mut rec = CurveRecorder::new(d.labels(), weights, d.task(), cfg.early_stopping);
    let (x, y, task, t) = (x.view(), d.labels(), d.task(), cfg.iterations);
    let params = match cfg.kind {
        LearnerKind::Gbdt => ModelParams::Gbdt(cfg.gbdt.fit(x, y, weights, task, t, seed, &mut rec)?),
        LearnerKind::Mlp => ModelParams::Mlp(cfg.mlp.fit(x, y, weights, task, t, seed, &mut rec)?),
        LearnerKind::Ridge => ModelParams::Ridge(cfg.ridge.fit(x, y, weights, task, t, seed, &mut rec)?),
    };
    let model = TrainedModel {
        params,
        feature_subset: feature_subset.to_vec(),
        n_features: d.n_features(),
        task,
    };
    Ok((model, rec.finish()?))
}

/// Squared error (regression) or clamped log-loss (classification) of the
/// model on every sample of `d`.
pub fn per_sample_loss(m: &TrainedModel, d: &Dataset) -> Result<Vec<f64>> {
    if m.task != d.task() {
        return Err(Error::TaskMismatch { model: m.task, data: d.task() });
    }
    let predictions = m.predict(d.features())?;
    Ok(loss::sample_losses(d.task(), &predictions, d.labels()))
}

/// Weights divided by their sum.
pub(crate) fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}
