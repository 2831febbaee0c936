use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{aggregate, fit_and_score};
use super::{prepare_data, write_csv_rows, DataSource, ExperimentConfig, ExperimentKind, PreparedData, Provenance};
use crate::ensemble::{Baseline, EnsembleConfig};
use crate::error::{Error, Result};
use crate::metrics::{EvalReport, METRIC_COLUMNS};
use crate::reweight::HMode;

/// Random columns and random rows added to the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSetting {
    pub name: String,
    pub extra_features: usize,
    pub sample_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Sr,
    SrH1Only,
    SrH2Only,
    Fs,
    SrFs,
    SingleModel,
    SimpleEnsemble,
    RandomEnsemble,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Sr,
        Variant::SrH1Only,
        Variant::SrH2Only,
        Variant::Fs,
        Variant::SrFs,
        Variant::SingleModel,
        Variant::SimpleEnsemble,
        Variant::RandomEnsemble,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Sr => "SR",
            Variant::SrH1Only => "SR (1st only)",
            Variant::SrH2Only => "SR (2nd only)",
            Variant::Fs => "FS",
            Variant::SrFs => "SR+FS",
            Variant::SingleModel => "SingleModel",
            Variant::SimpleEnsemble => "SimpleEnsemble",
            Variant::RandomEnsemble => "RandomEnsemble",
        }
    }

    /// The ensemble configuration this variant runs, derived from `base`.
    pub fn configure(self, base: &EnsembleConfig) -> EnsembleConfig {
        let steps = |reweighting, feature_selection, h_mode| EnsembleConfig {
            reweighting,
            feature_selection,
            h_mode,
            baseline: Baseline::None,
            ..base.clone()
        };
        match self {
            Variant::Sr => steps(true, false, HMode::Combined),
            Variant::SrH1Only => steps(true, false, HMode::H1Only),
            Variant::SrH2Only => steps(true, false, HMode::H2Only),
            Variant::Fs => steps(false, true, HMode::Combined),
            Variant::SrFs => steps(true, true, HMode::Combined),
            Variant::SingleModel => EnsembleConfig { sub_models: 1, ..steps(false, false, HMode::Combined) },
            Variant::SimpleEnsemble => EnsembleConfig { baseline: Baseline::Simple, ..steps(false, false, HMode::Combined) },
            Variant::RandomEnsemble => {
                EnsembleConfig { baseline: Baseline::RandomWeights, ..steps(false, false, HMode::Combined) }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub settings: Vec<NoiseSetting>,
    pub variants: Vec<Variant>,
    /// Metric columns of the results table.
    pub metrics: Vec<String>,
    /// Also write one report file per cell.
    pub run_reports: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        let setting = |name: &str, extra_features, sample_fraction| NoiseSetting {
            name: name.into(),
            extra_features,
            sample_fraction,
        };
        Self {
            settings: vec![setting("clean", 0, 0.0), setting("noise30", 20, 0.3), setting("noise50", 30, 0.5)],
            variants: Variant::ALL.to_vec(),
            metrics: ["precision", "auc", "f1", "pct"].map(String::from).to_vec(),
            run_reports: true,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.settings.is_empty() || self.variants.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one setting and one variant".into()));
        }
        if let Some(m) = self.metrics.iter().find(|m| !METRIC_COLUMNS.contains(&m.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown metric `{m}`")));
        }
        let mut names: Vec<&str> = self.settings.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("noise setting names must be unique".into()));
        }
        Ok(())
    }
}

/// Outcome of one (setting, variant, seed) fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub setting: String,
    pub variant: Variant,
    pub seed: u64,
    pub outcome: std::result::Result<EvalReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Ordered by setting, then variant, then seed, as configured.
    pub cells: Vec<GridCell>,
    /// Results table including its header row.
    pub table: Vec<Vec<String>>,
    pub provenance: Provenance,
}

impl GridResult {
    /// Mean of `metric` over the successful seeds of one cell group.
    pub fn mean(&self, setting: &str, variant: Variant, metric: &str) -> Option<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.setting == setting && c.variant == variant)
            .filter_map(|c| c.outcome.as_ref().ok())
            .filter_map(|r| r.get(metric))
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Runs every variant on every noise setting for every seed and writes
/// `results_table.csv` (variants by setting/metric, cells `mean/std`),
/// `grid_cells.csv` (one line per cell, failures included) and the
/// provenance file.
pub fn run_noise_grid(cfg: &ExperimentConfig) -> Result<GridResult> {
    cfg.expect(ExperimentKind::NoiseGrid)?;
    cfg.validate()?;
    cfg.grid.validate()?;
    if !matches!(cfg.data, DataSource::SyntheticClassification(_) | DataSource::Csv(_)) {
        return Err(Error::InvalidConfig("the noise grid needs a classification data source".into()));
    }
    cfg.prepare_output_dir()?;
    let provenance = Provenance::new(cfg)?;
    let grid = &cfg.grid;

    let data: Vec<(usize, u64, std::result::Result<PreparedData, String>)> = grid
        .settings
        .iter()
        .enumerate()
        .flat_map(|(s, setting)| {
            cfg.seeds.iter().map(move |&seed| {
                (s, seed, prepare_data(&cfg.data, seed, Some(setting)).map_err(|e| e.to_string()))
            })
        })
        .collect();

    let jobs: Vec<(usize, Variant, usize)> = (0..grid.settings.len())
        .flat_map(|s| {
            grid.variants
                .iter()
                .flat_map(move |&v| (0..cfg.seeds.len()).map(move |i| (s, v, i)))
        })
        .collect();
    let cells: Vec<GridCell> = jobs
        .par_iter()
        .map(|&(s, variant, i)| {
            let (_, seed, prepared) = &data[s * cfg.seeds.len() + i];
            let outcome = prepared.as_ref().map_err(Clone::clone).and_then(|d| {
                let ensemble = EnsembleConfig { master_seed: *seed, ..variant.configure(&cfg.ensemble) };
                fit_and_score(d, &ensemble, cfg).map(|(_, r)| r).map_err(|e| e.to_string())
            });
            let setting = grid.settings[s].name.clone();
            match &outcome {
                Ok(r) => log::info!("{setting} / {} / seed {seed}: auc {:.4}", variant.label(), r.auc),
                Err(e) => log::warn!("{setting} / {} / seed {seed} failed: {e}", variant.label()),
            }
            GridCell { setting, variant, seed: *seed, outcome }
        })
        .collect();

    let table = results_table(grid, &cells);
    write_csv_rows(&cfg.output_dir.join("results_table.csv"), &table)?;
    write_csv_rows(&cfg.output_dir.join("grid_cells.csv"), &cell_rows(&cells))?;
    if grid.run_reports {
        let dir = cfg.output_dir.join("runs");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for c in &cells {
            if let Ok(r) = &c.outcome {
                let slug = serde_json::to_value(c.variant).expect("unit variant");
                r.write(&dir, &format!("{}_{}_seed{}", c.setting, slug.as_str().unwrap_or("variant"), c.seed))?;
            }
        }
    }
    provenance.write(&cfg.output_dir)?;
    Ok(GridResult { cells, table, provenance })
}

fn results_table(grid: &GridSpec, cells: &[GridCell]) -> Vec<Vec<String>> {
    let mut header = vec!["variant".to_string()];
    for s in &grid.settings {
        header.extend(grid.metrics.iter().map(|m| format!("{}:{m}", s.name)));
    }
    let mut rows = vec![header];
    for &variant in &grid.variants {
        let mut row = vec![variant.label().to_string()];
        for s in &grid.settings {
            let group: Vec<&GridCell> =
                cells.iter().filter(|c| c.setting == s.name && c.variant == variant).collect();
            let ok: Vec<&EvalReport> = group.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
            let summary = aggregate(&ok);
            for m in &grid.metrics {
                row.push(if ok.is_empty() {
                    "error".into()
                } else {
                    let cell = summary.iter().find(|x| &x.metric == m).expect("known metric");
                    let text = format!("{:.6}/{:.6}", cell.mean, cell.std);
                    if ok.len() < group.len() {
                        format!("{text} ({}/{} ok)", ok.len(), group.len())
                    } else {
                        text
                    }
                });
            }
        }
        rows.push(row);
    }
    rows
}

fn cell_rows(cells: &[GridCell]) -> Vec<Vec<String>> {
    let mut header = vec!["setting".to_string(), "variant".into(), "seed".into()];
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    header.push("error".into());
    let mut rows = vec![header];
    for c in cells {
        let mut row = vec![c.setting.clone(), c.variant.label().into(), c.seed.to_string()];
        match &c.outcome {
            Ok(r) => {
                row.extend(r.csv_row());
                row.push(String::new());
            }
            Err(e) => {
                row.extend(METRIC_COLUMNS.iter().map(|_| String::new()));
                row.push(e.clone());
            }
        }
        rows.push(row);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_configure_the_ensemble() {
        let base = EnsembleConfig::default();
        let single = Variant::SingleModel.configure(&base);
        assert_eq!(single.sub_models, 1);
        assert!(!single.reweighting && !single.feature_selection);
        let h1 = Variant::SrH1Only.configure(&base);
        assert!(h1.reweighting && !h1.feature_selection && h1.h_mode == HMode::H1Only);
        assert_eq!(Variant::RandomEnsemble.configure(&base).baseline, Baseline::RandomWeights);
        for v in Variant::ALL {
            v.configure(&base).validate().unwrap();
        }
    }

    #[test]
    fn table_shape_and_failed_cells() {
        let grid = GridSpec {
            settings: GridSpec::default().settings[..2].to_vec(),
            ..Default::default()
        };
        let report = EvalReport {
            precision: 0.5,
            auc: 0.6,
            f1: 0.4,
            pct: 0.0,
            ic_mean: 0.1,
            ir: 1.0,
            threshold_used: 0.9,
            retrieved_count: 1,
            n_samples: 10,
            excluded_periods: 0,
        };
        let mut cells = Vec::new();
        for s in &grid.settings {
            for &v in &grid.variants {
                for seed in [1, 2] {
                    let outcome = if v == Variant::Fs && seed == 2 { Err("boom".into()) } else { Ok(report.clone()) };
                    cells.push(GridCell { setting: s.name.clone(), variant: v, seed, outcome });
                }
            }
        }
        let table = results_table(&grid, &cells);
        assert_eq!(table.len(), 9);
        assert!(table.iter().all(|r| r.len() == 9));
        assert_eq!(table[1][2], "0.600000/0.000000");
        assert!(table[4][2].ends_with("(1/2 ok)"));
        let rows = cell_rows(&cells);
        assert_eq!(rows.len(), 1 + 2 * 8 * 2);
        assert!(rows.iter().any(|r| r.last().unwrap() == "boom"));
    }
}
