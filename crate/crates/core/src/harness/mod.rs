//! Experiment configuration, orchestration and report files.
//!
//! Every experiment reads one [`ExperimentConfig`] (TOML), runs once per
//! configured seed, and writes plain CSV/TOML outputs plus a provenance file
//! holding the full configuration and its hash so the run can be repeated.

mod grid;
mod run;
mod toy;

pub use grid::{run_noise_grid, GridCell, GridResult, GridSpec, NoiseSetting, Variant};
pub use run::{run_eval, run_fit, run_predict, ExperimentResult, MetricSummary, SeedRun};
pub use toy::{run_toy, ToyResult, ToyRow, ToySpec};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    inject_noise, load_csv, make_synthetic_classification, make_synthetic_regression,
    sample_synthetic_classification, Dataset, SamplePopulation, TaskKind,
};
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::seed::{self, stream};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Toy,
    NoiseGrid,
    #[default]
    SingleRun,
    Predict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// One run per seed; each run uses the seed as the ensemble's master
    /// seed and as the data seed of generated datasets.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub data: DataSource,
    pub ensemble: EnsembleConfig,
    pub metrics: MetricSpec,
    pub grid: GridSpec,
    pub toy: ToySpec,
    pub predict: PredictSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::default(),
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("results"),
            data: DataSource::default(),
            ensemble: EnsembleConfig::default(),
            metrics: MetricSpec::default(),
            grid: GridSpec::default(),
            toy: ToySpec::default(),
            predict: PredictSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv(CsvSource),
    SyntheticClassification(ClassificationSpec),
    SyntheticRegression(RegressionSpec),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::SyntheticClassification(ClassificationSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    pub task: TaskKind,
    /// Evaluation file with the same columns; without it, evaluation runs
    /// on the training file.
    #[serde(default)]
    pub test_path: Option<PathBuf>,
}

fn default_label() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationSpec {
    pub n_samples: usize,
    pub test_samples: usize,
    pub informative: usize,
    pub uninformative: usize,
    pub noise_std: f64,
}

impl Default for ClassificationSpec {
    fn default() -> Self {
        Self { n_samples: 4000, test_samples: 4000, informative: 10, uninformative: 10, noise_std: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSpec {
    pub n_samples: usize,
    pub test_samples: usize,
    pub informative: usize,
    pub noise_std: f64,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self { n_samples: 2000, test_samples: 2000, informative: 10, noise_std: 0.5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSpec {
    pub model: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Dropped from the input before predicting when present.
    pub label_column: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Hex SHA-256 of the serialized configuration.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        self.ensemble.validate()?;
        self.metrics.validate()?;
        Ok(())
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output_dir(&self) -> Result<()> {
        let dir = &self.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let probe = dir.join(".write_probe");
        std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
        std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
    }

    fn expect(&self, kind: ExperimentKind) -> Result<()> {
        if self.experiment != kind {
            return Err(Error::InvalidConfig(format!(
                "config is for experiment {:?}, not {:?}",
                self.experiment, kind
            )));
        }
        Ok(())
    }
}

/// Configuration, seeds and code version of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub code_version: String,
    pub config: ExperimentConfig,
}

impl Provenance {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            config_hash: cfg.hash()?,
            seeds: cfg.seeds.clone(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
        })
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join("provenance.toml");
        let text = toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Training data and the held-out data evaluated against it.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub population: SamplePopulation,
    pub test: Dataset,
    /// Forward returns of the test rows, when the source has them.
    pub test_returns: Option<Vec<f64>>,
}

/// Loads or generates the data of one run and applies `noise` to it.
///
/// Injected random rows go into the training data only; the test data gets
/// the same number of random columns so widths agree.
pub fn prepare_data(source: &DataSource, data_seed: u64, noise: Option<&NoiseSetting>) -> Result<PreparedData> {
    let (train, population, test, test_returns) = match source {
        DataSource::Csv(c) => {
            let train = load_csv(&c.path, &c.label_column, c.task)?;
            let test = match &c.test_path {
                Some(p) => load_csv(p, &c.label_column, c.task)?,
                None => {
                    log::warn!("no test_path configured; evaluating on the training file");
                    train.clone()
                }
            };
            let population = SamplePopulation::uniform(crate::SampleTag::Clean, train.n_samples());
            (train, population, test, None)
        }
        DataSource::SyntheticClassification(s) => {
            let train = make_synthetic_classification(s.n_samples, s.informative, s.uninformative, s.noise_std, data_seed)?;
            let test_seed = seed::derive(data_seed, &[stream::TEST_SPLIT]);
            let test = sample_synthetic_classification(&train.coefficients, s.test_samples, s.noise_std, test_seed)?;
            (train.dataset, train.population, test.dataset, Some(test.returns))
        }
        DataSource::SyntheticRegression(s) => {
            let (all, _, _) = make_synthetic_regression(s.n_samples + s.test_samples, s.informative, s.noise_std, data_seed)?;
            let train_rows: Vec<usize> = (0..s.n_samples).collect();
            let test_rows: Vec<usize> = (s.n_samples..s.n_samples + s.test_samples).collect();
            let train = all.select_rows(&train_rows)?;
            let population = SamplePopulation::uniform(crate::SampleTag::Clean, s.n_samples);
            (train, population, all.select_rows(&test_rows)?, None)
        }
    };
    match noise {
        Some(n) if n.extra_features > 0 || n.sample_fraction > 0.0 => {
            let train_seed = seed::derive(data_seed, &[stream::TRAIN_SPLIT]);
            let (train, population) = inject_noise(&train, &population, n.extra_features, n.sample_fraction, train_seed)?;
            let test_pop = SamplePopulation::uniform(crate::SampleTag::Clean, test.n_samples());
            let test_seed = seed::derive(data_seed, &[stream::TEST_SPLIT]);
            let (test, _) = inject_noise(&test, &test_pop, n.extra_features, 0.0, test_seed)?;
            Ok(PreparedData { train, population, test, test_returns })
        }
        _ => Ok(PreparedData { train, population, test, test_returns }),
    }
}

/// Mean and sample standard deviation (NaN for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        f64::NAN
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

fn write_csv_rows(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
