//! Sequential ensemble construction.
//!
//! Sub-model 1 is trained with unit weights on all features. After each
//! sub-model `k` the ensemble's per-sample training loss is recomputed from
//! the running average of sub-models `1..=k`; reweighting turns it and the
//! new sub-model's loss curves into the next sample weights, and feature
//! selection scores the ensemble to draw the next feature subset. The
//! prediction is the plain mean of all sub-models.

use std::path::Path;

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::featsel::{self, AveragedPredictor, FeatureReport, FsConfig};
use crate::learners::loss::sample_losses;
use crate::learners::{self, LearnerConfig, TrainedModel};
use crate::reweight::{self, HMode, SrConfig, WeightAssignment};
use crate::seed::{self, stream};

/// How sub-models other than the first are trained when not using
/// reweighting and feature selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    None,
    /// Unit weights and all features; sub-models differ only by seed.
    Simple,
    /// Fresh i.i.d. `U(0.5, 1.5)` sample weights per sub-model, all features.
    RandomWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub sub_models: usize,
    pub learner: LearnerConfig,
    pub reweighting: bool,
    pub feature_selection: bool,
    pub sr: SrConfig,
    pub fs: FsConfig,
    pub h_mode: HMode,
    pub baseline: Baseline,
    pub master_seed: u64,
    /// Also run reweighting and feature selection after the last sub-model.
    /// Their output is recorded but never used for training.
    pub final_step: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            sub_models: 6,
            learner: LearnerConfig::default(),
            reweighting: true,
            feature_selection: true,
            sr: SrConfig::default(),
            fs: FsConfig::default(),
            h_mode: HMode::Combined,
            baseline: Baseline::None,
            master_seed: 0,
            final_step: true,
        }
    }
}

impl EnsembleConfig {
    /// Single sub-model, no reweighting or feature selection.
    pub fn single(learner: LearnerConfig) -> Self {
        Self { sub_models: 1, learner, reweighting: false, feature_selection: false, ..Default::default() }
    }

    /// `k` sub-models under one of the baselines.
    pub fn baseline(k: usize, learner: LearnerConfig, baseline: Baseline) -> Self {
        Self {
            sub_models: k,
            learner,
            reweighting: false,
            feature_selection: false,
            baseline,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sub_models == 0 {
            return Err(Error::InvalidConfig("need at least one sub-model".into()));
        }
        if self.baseline != Baseline::None && (self.reweighting || self.feature_selection) {
            return Err(Error::InvalidConfig(
                "baselines cannot be combined with reweighting or feature selection".into(),
            ));
        }
        self.learner.validate()?;
        if self.reweighting {
            self.sr.validate()?;
        }
        if self.feature_selection {
            self.fs.validate()?;
        }
        Ok(())
    }
}

/// One trained sub-model and what was computed right after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubModelRecord {
    pub model: TrainedModel,
    /// Sample weights this sub-model was trained with.
    pub weights: Vec<f64>,
    /// Per-sample training loss of the ensemble of sub-models `1..=k`.
    pub ensemble_losses: Vec<f64>,
    /// Weights produced for the next sub-model.
    pub reweighting: Option<WeightAssignment>,
    /// Feature subset produced for the next sub-model.
    pub selection: Option<FeatureReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub config: EnsembleConfig,
    pub n_features: usize,
    pub task: TaskKind,
    pub feature_names: Vec<String>,
    pub sub_models: Vec<SubModelRecord>,
}

const STATE_FORMAT: &str = "double-ensemble/ensemble-state";
const STATE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    state: T,
}

struct Members<'a> {
    records: &'a [SubModelRecord],
    task: TaskKind,
}

impl AveragedPredictor for Members<'_> {
    fn task(&self) -> TaskKind {
        self.task
    }

    fn n_members(&self) -> usize {
        self.records.len()
    }

    fn member_predict(&self, member: usize, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.records[member].model.predict(rows)
    }

    fn member_reads(&self, member: usize, feature: usize) -> bool {
        self.records[member].model.feature_subset.contains(&feature)
    }
}

fn sub_model_error(k: usize) -> impl Fn(Error) -> Error {
    move |e| Error::SubModel { index: k, source: Box::new(e) }
}

/// Trains `cfg.sub_models` sub-models on `d`.
pub fn fit(d: &Dataset, cfg: &EnsembleConfig) -> Result<EnsembleState> {
    cfg.validate()?;
    let n = d.n_samples();
    let all_features: Vec<usize> = (0..d.n_features()).collect();
    let mut weights = vec![1.0; n];
    let mut subset = all_features.clone();
    let mut running_sum = vec![0.0; n];
    let mut records: Vec<SubModelRecord> = Vec::with_capacity(cfg.sub_models);

    for k in 1..=cfg.sub_models {
        if k > 1 && cfg.baseline == Baseline::RandomWeights {
            let mut rng = seed::rng(cfg.master_seed, &[stream::RANDOM_WEIGHTS, k as u64]);
            weights = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        }
        let sub_seed = seed::derive(cfg.master_seed, &[stream::SUB_MODEL, k as u64]);
        let (model, curves) =
            learners::train(d, &weights, &subset, &cfg.learner, sub_seed).map_err(sub_model_error(k))?;
        let predictions = model.predict(d.features()).map_err(sub_model_error(k))?;
        running_sum.iter_mut().zip(&predictions).for_each(|(s, p)| *s += p);
        let mean: Vec<f64> = running_sum.iter().map(|s| s / k as f64).collect();
        let ensemble_losses = sample_losses(d.task(), &mean, d.labels());
        records.push(SubModelRecord {
            model,
            weights: std::mem::take(&mut weights),
            ensemble_losses,
            reweighting: None,
            selection: None,
        });
        weights = vec![1.0; n];

        if k == cfg.sub_models && !cfg.final_step {
            break;
        }
        if cfg.reweighting {
            let wa = reweight::sample_reweight(&curves, &records[k - 1].ensemble_losses, k, &cfg.sr, cfg.h_mode)
                .map_err(sub_model_error(k))?;
            log::debug!("sub-model {k}: bin weights {:?}", bin_weights(&wa));
            weights = wa.weights().to_vec();
            records[k - 1].reweighting = Some(wa);
        }
        if cfg.feature_selection {
            let fs = FsConfig {
                shuffle_seed: seed::derive(
                    cfg.master_seed,
                    &[stream::FEATURE_SELECTION, k as u64, cfg.fs.shuffle_seed],
                ),
                ..cfg.fs.clone()
            };
            let members = Members { records: &records, task: d.task() };
            let report = featsel::select_features(&members, d, &fs).map_err(sub_model_error(k))?;
            log::debug!("sub-model {k}: selected {} of {} features", report.selected.len(), d.n_features());
            subset = report.selected.clone();
            records[k - 1].selection = Some(report);
        } else {
            subset.clone_from(&all_features);
        }
    }

    Ok(EnsembleState {
        config: cfg.clone(),
        n_features: d.n_features(),
        task: d.task(),
        feature_names: d.feature_names().to_vec(),
        sub_models: records,
    })
}

fn bin_weights(wa: &WeightAssignment) -> Vec<f64> {
    let mut seen = vec![f64::NAN; wa.binning.bin_mean_h.len()];
    for (b, w) in wa.binning.bin_of.iter().zip(wa.weights()) {
        seen[*b] = *w;
    }
    seen
}

impl EnsembleState {
    pub fn k_built(&self) -> usize {
        self.sub_models.len()
    }

    /// Mean of the sub-model predictions on full-width rows.
    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.predict_first(self.k_built(), rows)
    }

    /// Mean of the first `k` sub-models.
    pub fn predict_first(&self, k: usize, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if k == 0 || k > self.k_built() {
            return Err(Error::InvalidConfig(format!("cannot average {k} of {} sub-models", self.k_built())));
        }
        if rows.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: rows.ncols(),
                context: "feature columns",
            });
        }
        let members = self.sub_models[..k]
            .iter()
            .map(|r| r.model.predict(rows))
            .collect::<Result<Vec<_>>>()?;
        Ok(featsel::average(&members))
    }

    /// Versioned JSON; floats round-trip bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&Envelope { format: STATE_FORMAT.into(), version: STATE_VERSION, state: self })
            .map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope<Self> = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        if env.format != STATE_FORMAT || env.version != STATE_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported state format {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.state)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Writes `weights_k{k}.csv` and `features_k{k}.csv` for every step that
    /// produced them.
    pub fn write_sidecars(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (i, r) in self.sub_models.iter().enumerate() {
            if let Some(wa) = &r.reweighting {
                reweight::write_weights_csv(wa, dir.join(format!("weights_k{}.csv", i + 1)))?;
            }
            if let Some(fs) = &r.selection {
                featsel::write_feature_csv(fs, &self.feature_names, dir.join(format!("features_k{}.csv", i + 1)))?;
            }
        }
        Ok(())
    }
}

impl AveragedPredictor for EnsembleState {
    fn task(&self) -> TaskKind {
        self.task
    }

    fn n_members(&self) -> usize {
        self.k_built()
    }

    fn member_predict(&self, member: usize, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.sub_models[member].model.predict(rows)
    }

    fn member_reads(&self, member: usize, feature: usize) -> bool {
        self.sub_models[member].model.feature_subset.contains(&feature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_synthetic_regression;
    use crate::learners::gbdt::GbdtParams;
    use crate::learners::per_sample_loss;

    fn learner() -> LearnerConfig {
        LearnerConfig::gbdt(15, GbdtParams { max_leaves: 8, learning_rate: 0.2, min_samples_leaf: 5 })
    }

    fn data() -> Dataset {
        make_synthetic_regression(150, 4, 0.3, 3).unwrap().0
    }

    fn full(k: usize) -> EnsembleConfig {
        EnsembleConfig { sub_models: k, learner: learner(), master_seed: 11, ..Default::default() }
    }

    #[test]
    fn one_sub_model_is_the_single_model() {
        let d = data();
        let a = fit(&d, &EnsembleConfig { master_seed: 11, ..full(1) }).unwrap();
        let b = fit(&d, &EnsembleConfig { master_seed: 11, ..EnsembleConfig::single(learner()) }).unwrap();
        assert_eq!(a.predict(d.features()).unwrap(), b.predict(d.features()).unwrap());
        assert!(b.sub_models[0].weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn disabled_steps_give_simple_ensemble() {
        let d = data();
        let plain = EnsembleConfig { reweighting: false, feature_selection: false, ..full(3) };
        let simple = EnsembleConfig { master_seed: 11, ..EnsembleConfig::baseline(3, learner(), Baseline::Simple) };
        let a = fit(&d, &plain).unwrap();
        let b = fit(&d, &simple).unwrap();
        assert_eq!(a.predict(d.features()).unwrap(), b.predict(d.features()).unwrap());
    }

    #[test]
    fn running_loss_matches_recomputation() {
        let d = data();
        let s = fit(&d, &full(3)).unwrap();
        for k in 1..=3 {
            let mean = s.predict_first(k, d.features()).unwrap();
            let brute = sample_losses(d.task(), &mean, d.labels());
            for (a, b) in brute.iter().zip(&s.sub_models[k - 1].ensemble_losses) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
        let single = per_sample_loss(&s.sub_models[0].model, &d).unwrap();
        assert_eq!(single, s.sub_models[0].ensemble_losses);
    }

    #[test]
    fn feature_subsets_follow_selection() {
        let d = data();
        let s = fit(&d, &full(3)).unwrap();
        assert_eq!(s.sub_models[0].model.feature_subset, (0..d.n_features()).collect::<Vec<_>>());
        for k in 1..3 {
            let chosen = &s.sub_models[k - 1].selection.as_ref().unwrap().selected;
            assert_eq!(&s.sub_models[k].model.feature_subset, chosen);
        }
        // the last step is computed and recorded but not used
        assert!(s.sub_models[2].selection.is_some() && s.sub_models[2].reweighting.is_some());
    }

    #[test]
    fn weights_come_from_reweighting() {
        let d = data();
        let s = fit(&d, &full(2)).unwrap();
        let produced = s.sub_models[0].reweighting.as_ref().unwrap().weights();
        assert_eq!(s.sub_models[1].weights, produced);
    }

    #[test]
    fn deterministic_and_round_trips() {
        let d = data();
        let a = fit(&d, &full(2)).unwrap();
        let b = fit(&d, &full(2)).unwrap();
        let json = a.to_json().unwrap();
        assert_eq!(json, b.to_json().unwrap());
        let back = EnsembleState::from_json(&json).unwrap();
        assert_eq!(back.predict(d.features()).unwrap(), a.predict(d.features()).unwrap());
    }

    #[test]
    fn random_weights_are_bounded() {
        let d = data();
        let cfg = EnsembleConfig { master_seed: 2, ..EnsembleConfig::baseline(3, learner(), Baseline::RandomWeights) };
        let s = fit(&d, &cfg).unwrap();
        assert!(s.sub_models[0].weights.iter().all(|&w| w == 1.0));
        assert!(s.sub_models[1..].iter().flat_map(|r| &r.weights).all(|&w| (0.5..1.5).contains(&w)));
        assert_ne!(s.sub_models[1].weights, s.sub_models[2].weights);
    }

    #[test]
    fn mean_of_two_predictions() {
        assert!((featsel::average(&[vec![0.2], vec![0.6]])[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn width_mismatch_rejected() {
        let d = data();
        let s = fit(&d, &EnsembleConfig::single(learner())).unwrap();
        let narrow = d.features().slice(ndarray::s![.., 1..]).to_owned();
        assert!(matches!(s.predict(narrow.view()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn learner_errors_name_the_sub_model() {
        let d = data();
        let cfg = EnsembleConfig { learner: LearnerConfig { iterations: 0, ..learner() }, ..full(2) };
        assert!(fit(&d, &cfg).is_err());
    }
}
