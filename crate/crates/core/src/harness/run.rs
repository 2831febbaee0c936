use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{mean_std, prepare_data, write_csv_rows, ExperimentConfig, ExperimentKind, PreparedData, Provenance};
use crate::dataset::read_matrix;
use crate::ensemble::{self, EnsembleConfig, EnsembleState};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport, METRIC_COLUMNS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Per-seed reports of one configuration and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub runs: Vec<SeedRun>,
    pub aggregate: Vec<MetricSummary>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    pub fn summary(&self, metric: &str) -> Option<&MetricSummary> {
        self.aggregate.iter().find(|m| m.metric == metric)
    }
}

pub(super) fn aggregate(reports: &[&EvalReport]) -> Vec<MetricSummary> {
    METRIC_COLUMNS
        .iter()
        .map(|&metric| {
            let values: Vec<f64> = reports.iter().map(|r| r.get(metric).expect("known column")).collect();
            let (mean, std) = mean_std(&values);
            MetricSummary { metric: metric.into(), mean, std }
        })
        .collect()
}

fn seeded(cfg: &EnsembleConfig, seed: u64) -> EnsembleConfig {
    EnsembleConfig { master_seed: seed, ..cfg.clone() }
}

/// Fits `ensemble` on the prepared data and scores its held-out part.
pub(super) fn fit_and_score(
    data: &PreparedData,
    ensemble: &EnsembleConfig,
    cfg: &ExperimentConfig,
) -> Result<(EnsembleState, EvalReport)> {
    let state = ensemble::fit(&data.train, ensemble)?;
    let scores = state.predict(data.test.features())?;
    let report = evaluate(data.test.task(), &scores, data.test.labels(), data.test_returns.as_deref(), &cfg.metrics)?;
    Ok((state, report))
}

/// Fits the configured ensemble with the first seed and saves it as
/// `model.json` plus weight and feature sidecars.
pub fn run_fit(cfg: &ExperimentConfig) -> Result<EnsembleState> {
    cfg.validate()?;
    cfg.prepare_output_dir()?;
    let seed = cfg.seeds[0];
    let data = prepare_data(&cfg.data, seed, None)?;
    let state = ensemble::fit(&data.train, &seeded(&cfg.ensemble, seed))?;
    state.save(cfg.output_dir.join("model.json"))?;
    state.write_sidecars(&cfg.output_dir)?;
    Provenance::new(cfg)?.write(&cfg.output_dir)?;
    Ok(state)
}

/// Fits and evaluates once per seed, writing `report_seed{s}.{toml,csv}`,
/// per-seed sidecars, `summary.csv` and the provenance file.
pub fn run_eval(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.expect(ExperimentKind::SingleRun)?;
    cfg.validate()?;
    cfg.prepare_output_dir()?;
    let provenance = Provenance::new(cfg)?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let data = prepare_data(&cfg.data, seed, None)?;
        let (state, report) = fit_and_score(&data, &seeded(&cfg.ensemble, seed), cfg)?;
        report.write(&cfg.output_dir, &format!("report_seed{seed}"))?;
        let sidecars = cfg.output_dir.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&sidecars).map_err(|e| Error::io(&sidecars, e))?;
        state.write_sidecars(&sidecars)?;
        log::info!("seed {seed}: auc {:.4} precision {:.4}", report.auc, report.precision);
        runs.push(SeedRun { seed, report });
    }
    let aggregate = aggregate(&runs.iter().map(|r| &r.report).collect::<Vec<_>>());
    let mut rows = vec![vec!["metric".to_string(), "mean".into(), "std".into()]];
    rows.extend(aggregate.iter().map(|m| vec![m.metric.clone(), m.mean.to_string(), m.std.to_string()]));
    write_csv_rows(&cfg.output_dir.join("summary.csv"), &rows)?;
    provenance.write(&cfg.output_dir)?;
    Ok(ExperimentResult { runs, aggregate, provenance })
}

/// Scores every row of `input` with the saved ensemble and writes
/// `row_index,score`. Returns the number of rows scored.
///
/// A column named `label_column` is dropped first if present; the remaining
/// width must equal the width the model was trained on.
pub fn run_predict(
    model: impl AsRef<Path>,
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    label_column: Option<&str>,
) -> Result<usize> {
    let state = EnsembleState::load(model)?;
    let (header, table) = read_matrix(input)?;
    let keep: Vec<usize> = (0..header.len()).filter(|&i| Some(header[i].as_str()) != label_column).collect();
    if keep.len() != state.n_features {
        return Err(Error::DimensionMismatch {
            expected: state.n_features,
            found: keep.len(),
            context: "feature columns in prediction input",
        });
    }
    let rows = table.select(ndarray::Axis(1), &keep);
    let scores = state.predict(rows.view())?;
    let mut out = vec![vec!["row_index".to_string(), "score".into()]];
    out.extend(scores.iter().enumerate().map(|(i, s)| vec![i.to_string(), s.to_string()]));
    write_csv_rows(output.as_ref(), &out)?;
    Ok(scores.len())
}
