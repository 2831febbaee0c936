//! Shuffling-based feature selection.
//!
//! A feature's g-value is the standardized mean increase of the ensemble's
//! per-sample loss when that feature's column is randomly permuted:
//! `mean(L_f - L) / std(L_f - L)`. Features are then split into equal-count
//! bins by descending g, and each bin contributes `ceil(r_d * N_d)` features
//! drawn uniformly at random, with larger ratios for higher-g bins.

use std::path::Path;

use ndarray::{ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::noise::ceil_count;
use crate::dataset::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::learners::loss::sample_losses;
use crate::learners::TrainedModel;
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsConfig {
    pub bins: usize,
    /// One ratio per bin, non-increasing; the first applies to the bin with
    /// the largest g-values.
    pub sampling_ratios: Vec<f64>,
    pub shuffle_seed: u64,
    /// Independent shuffles averaged per feature; 1 reproduces a single
    /// shuffle.
    pub repeats: usize,
}

impl Default for FsConfig {
    fn default() -> Self {
        Self { bins: 5, sampling_ratios: vec![0.8, 0.7, 0.6, 0.5, 0.4], shuffle_seed: 0, repeats: 3 }
    }
}

impl FsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.bins == 0 || self.repeats == 0 {
            return bad("feature selection needs bins >= 1 and repeats >= 1".into());
        }
        if self.sampling_ratios.len() != self.bins {
            return bad(format!(
                "{} sampling ratios given for {} bins",
                self.sampling_ratios.len(),
                self.bins
            ));
        }
        if let Some(r) = self.sampling_ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return bad(format!("sampling ratio {r} outside (0, 1]"));
        }
        if self.sampling_ratios.windows(2).any(|w| w[1] > w[0]) {
            return bad("sampling ratios must be non-increasing".into());
        }
        Ok(())
    }
}

/// A model whose prediction is the plain average of member predictions.
///
/// Members that never read a feature are skipped when that feature is
/// shuffled, which both saves work and makes their contribution exactly
/// unchanged.
pub trait AveragedPredictor: Sync {
    fn task(&self) -> TaskKind;
    fn n_members(&self) -> usize;
    fn member_predict(&self, member: usize, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>>;
    fn member_reads(&self, member: usize, feature: usize) -> bool;
}

impl AveragedPredictor for TrainedModel {
    fn task(&self) -> TaskKind {
        self.task
    }

    fn n_members(&self) -> usize {
        1
    }

    fn member_predict(&self, _member: usize, rows: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.predict(rows)
    }

    fn member_reads(&self, _member: usize, feature: usize) -> bool {
        self.feature_subset.contains(&feature)
    }
}

/// Sums member predictions in member order, then divides by the count.
pub(crate) fn average(members: &[Vec<f64>]) -> Vec<f64> {
    let k = members.len() as f64;
    let mut sum = members[0].clone();
    for m in &members[1..] {
        sum.iter_mut().zip(m).for_each(|(s, v)| *s += v);
    }
    sum.iter_mut().for_each(|s| *s /= k);
    sum
}

/// `mean(d) / std(d)` of `d = shuffled - base`, with the `N - 1` standard
/// deviation; zero when the spread is zero.
pub fn standardized_increase(base: &[f64], shuffled: &[f64]) -> f64 {
    let n = base.len() as f64;
    let diffs: Vec<f64> = shuffled.iter().zip(base).map(|(s, b)| s - b).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var > 0.0 {
        mean / var.sqrt()
    } else {
        0.0
    }
}

struct Baseline<'a> {
    d: &'a Dataset,
    members: Vec<Vec<f64>>,
    losses: Vec<f64>,
}

impl<'a> Baseline<'a> {
    fn new(model: &dyn AveragedPredictor, d: &'a Dataset) -> Result<Self> {
        if model.task() != d.task() {
            return Err(Error::TaskMismatch { model: model.task(), data: d.task() });
        }
        if d.n_samples() < 2 {
            return Err(Error::InvalidDataset("g-values need at least two samples".into()));
        }
        if model.n_members() == 0 {
            return Err(Error::InvalidConfig("ensemble has no members".into()));
        }
        let members = (0..model.n_members())
            .map(|m| model.member_predict(m, d.features()))
            .collect::<Result<Vec<_>>>()?;
        let losses = sample_losses(d.task(), &average(&members), d.labels());
        Ok(Self { d, members, losses })
    }

    fn g(&self, model: &dyn AveragedPredictor, feature: usize, seed: u64, repeats: usize) -> Result<f64> {
        let readers: Vec<usize> =
            (0..self.members.len()).filter(|&m| model.member_reads(m, feature)).collect();
        if readers.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for repeat in 0..repeats {
            let mut rng = seed::rng(seed, &[stream::FEATURE_SHUFFLE, feature as u64, repeat as u64]);
            let mut column: Vec<f64> = self.d.features().column(feature).to_vec();
            column.shuffle(&mut rng);
            let mut rows = self.d.features().to_owned();
            rows.index_axis_mut(Axis(1), feature)
                .iter_mut()
                .zip(&column)
                .for_each(|(cell, v)| *cell = *v);
            let mut members = self.members.clone();
            for &m in &readers {
                members[m] = model.member_predict(m, rows.view())?;
            }
            let shuffled = sample_losses(self.d.task(), &average(&members), self.d.labels());
            total += standardized_increase(&self.losses, &shuffled);
        }
        Ok(total / repeats as f64)
    }
}

/// g-value of one feature, averaged over `repeats` independent shuffles.
pub fn g_value(
    model: &dyn AveragedPredictor,
    d: &Dataset,
    feature: usize,
    seed: u64,
    repeats: usize,
) -> Result<f64> {
    if feature >= d.n_features() {
        return Err(Error::InvalidConfig(format!("feature index {feature} out of range")));
    }
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be >= 1".into()));
    }
    Baseline::new(model, d)?.g(model, feature, seed, repeats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub g_values: Vec<f64>,
    /// Zero-based bin of each feature; bin 0 holds the largest g-values.
    pub bin_of: Vec<usize>,
    /// Selected feature indices, ascending.
    pub selected: Vec<usize>,
    /// `(N_d, ceil(r_d * N_d))` per bin.
    pub per_bin_counts: Vec<(usize, usize)>,
    pub bins_clamped: bool,
}

/// Scores every feature against `model` and draws the next feature subset.
pub fn select_features(model: &dyn AveragedPredictor, d: &Dataset, cfg: &FsConfig) -> Result<FeatureReport> {
    cfg.validate()?;
    let f = d.n_features();
    let baseline = Baseline::new(model, d)?;
    let g_values = (0..f)
        .into_par_iter()
        .map(|j| baseline.g(model, j, cfg.shuffle_seed, cfg.repeats))
        .collect::<Result<Vec<f64>>>()?;

    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| g_values[b].total_cmp(&g_values[a]).then(a.cmp(&b)));
    let bins = cfg.bins.min(f);
    let (base, extra) = (f / bins, f % bins);
    let mut rng = seed::rng(cfg.shuffle_seed, &[stream::FEATURE_DRAW]);
    let mut bin_of = vec![0; f];
    let mut selected = Vec::new();
    let mut per_bin_counts = Vec::with_capacity(bins);
    let mut start = 0;
    for (b, &ratio) in cfg.sampling_ratios.iter().take(bins).enumerate() {
        let size = base + usize::from(b < extra);
        let members = &order[start..start + size];
        members.iter().for_each(|&j| bin_of[j] = b);
        let take = ceil_count(ratio, size).clamp(1, size);
        selected.extend(index::sample(&mut rng, size, take).into_iter().map(|i| members[i]));
        per_bin_counts.push((size, take));
        start += size;
    }
    selected.sort_unstable();
    Ok(FeatureReport { g_values, bin_of, selected, per_bin_counts, bins_clamped: bins < cfg.bins })
}

/// Writes `feature_index,feature_name,g_value,bin,selected` rows.
pub fn write_feature_csv(report: &FeatureReport, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["feature_index", "feature_name", "g_value", "bin", "selected"])?;
    for (j, name) in names.iter().enumerate() {
        w.write_record([
            j.to_string(),
            name.clone(),
            report.g_values[j].to_string(),
            report.bin_of[j].to_string(),
            u8::from(report.selected.binary_search(&j).is_ok()).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
