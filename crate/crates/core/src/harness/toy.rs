use serde::{Deserialize, Serialize};

use super::{write_csv_rows, ExperimentConfig, ExperimentKind, Provenance};
use crate::dataset::{make_toy_classification, SampleTag};
use crate::error::Result;
use crate::learners::mlp::MlpParams;
use crate::learners::{self, LearnerConfig};
use crate::reweight::{rank_normalize, sample_reweight, HMode};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySpec {
    pub n_easy: usize,
    pub n_hard: usize,
    pub n_noisy: usize,
    pub margin: f64,
    pub learner: LearnerConfig,
    /// Samples per population whose normalized loss curves are exported.
    pub curve_samples: usize,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            n_easy: 400,
            n_hard: 400,
            n_noisy: 200,
            margin: 0.3,
            learner: LearnerConfig::mlp(
                40,
                MlpParams { hidden_sizes: vec![16], learning_rate: 0.1, batch_size: 32 },
            ),
            curve_samples: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRow {
    pub seed: u64,
    pub mode: HMode,
    pub population: SampleTag,
    pub count: usize,
    pub mean_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyResult {
    pub rows: Vec<ToyRow>,
    pub provenance: Provenance,
}

impl ToyResult {
    pub fn mean_weight(&self, seed: u64, mode: HMode, population: SampleTag) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.seed == seed && r.mode == mode && r.population == population)
            .map(|r| r.mean_weight)
    }
}

const MODES: [HMode; 3] = [HMode::H1Only, HMode::H2Only, HMode::Combined];

fn mode_name(mode: HMode) -> &'static str {
    match mode {
        HMode::H1Only => "h1_only",
        HMode::H2Only => "h2_only",
        HMode::Combined => "combined",
    }
}

/// For each seed: generates the toy task, trains one sub-model with unit
/// weights, and reweights its samples with h1 only, h2 only and both.
///
/// Writes `toy_weights.csv` (mean weight per seed, mode and population),
/// `toy_curves.csv` (rank-normalized loss curves of the first
/// `curve_samples` samples of each population) and the provenance file.
pub fn run_toy(cfg: &ExperimentConfig) -> Result<ToyResult> {
    cfg.expect(ExperimentKind::Toy)?;
    cfg.validate()?;
    cfg.toy.learner.validate()?;
    cfg.prepare_output_dir()?;
    let provenance = Provenance::new(cfg)?;
    let spec = &cfg.toy;
    let mut rows = Vec::new();
    let mut curve_rows = vec![["seed", "population", "sample_index", "iteration", "normalized_loss"]
        .map(String::from)
        .to_vec()];

    for &seed in &cfg.seeds {
        let (d, pop) = make_toy_classification(spec.n_easy, spec.n_hard, spec.n_noisy, spec.margin, seed)?;
        let weights = vec![1.0; d.n_samples()];
        let all: Vec<usize> = (0..d.n_features()).collect();
        let learner_seed = seed::derive(seed, &[stream::SUB_MODEL, 1]);
        let (model, curves) = learners::train(&d, &weights, &all, &spec.learner, learner_seed)?;
        let losses = learners::per_sample_loss(&model, &d)?;
        for mode in MODES {
            let wa = sample_reweight(&curves, &losses, 1, &cfg.ensemble.sr, mode)?;
            for tag in pop.present() {
                let members: Vec<usize> = (0..pop.len()).filter(|&i| pop.tags()[i] == tag).collect();
                let mean_weight =
                    members.iter().map(|&i| wa.weights()[i]).sum::<f64>() / members.len() as f64;
                rows.push(ToyRow { seed, mode, population: tag, count: members.len(), mean_weight });
            }
        }
        let normalized = rank_normalize(curves.values().view())?;
        for tag in pop.present() {
            let picks = (0..pop.len()).filter(|&i| pop.tags()[i] == tag).take(spec.curve_samples);
            for i in picks {
                for (t, v) in normalized.row(i).iter().enumerate() {
                    curve_rows.push(vec![seed.to_string(), tag.to_string(), i.to_string(), (t + 1).to_string(), v.to_string()]);
                }
            }
        }
    }

    let mut weight_rows = vec![["seed", "mode", "population", "count", "mean_weight"].map(String::from).to_vec()];
    weight_rows.extend(rows.iter().map(|r| {
        vec![
            r.seed.to_string(),
            mode_name(r.mode).into(),
            r.population.to_string(),
            r.count.to_string(),
            r.mean_weight.to_string(),
        ]
    }));
    write_csv_rows(&cfg.output_dir.join("toy_weights.csv"), &weight_rows)?;
    write_csv_rows(&cfg.output_dir.join("toy_curves.csv"), &curve_rows)?;
    provenance.write(&cfg.output_dir)?;
    Ok(ToyResult { rows, provenance })
}
