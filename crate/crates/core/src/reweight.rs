//! Learning-trajectory sample reweighting.
//!
//! Each sample gets an h-value from two rank-normalized signals: how small
//! the current ensemble's loss on it is (`h1`) and how much its normalized
//! loss rose between the start and the end of the last sub-model's training
//! (`h2`). Samples are then binned by h and every bin receives the weight
//! `1 / (gamma^k * mean_h + 0.1)`, so large h means small weight and the
//! distribution flattens as the sub-model index `k` grows.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::noise::ceil_count;
use crate::error::{Error, Result};
use crate::learners::LossCurves;

/// Substitute denominator when a sample's start-of-training normalized loss
/// is exactly zero.
pub const START_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub bins: usize,
    pub gamma: f64,
    /// Share of iterations averaged at each end of the loss curve.
    pub head_tail_fraction: f64,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self { alpha1: 1.0, alpha2: 1.0, bins: 10, gamma: 0.9, head_tail_fraction: 0.1 }
    }
}

impl SrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::InvalidConfig("reweighting needs at least one bin".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must be in [0, 1], got {}", self.gamma)));
        }
        if !(self.head_tail_fraction > 0.0 && self.head_tail_fraction <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "head_tail_fraction must be in (0, 0.5], got {}",
                self.head_tail_fraction
            )));
        }
        if !(self.alpha1.is_finite() && self.alpha2.is_finite()) {
            return Err(Error::InvalidConfig("alpha coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Which terms enter the h-value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HMode {
    #[default]
    Combined,
    H1Only,
    H2Only,
}

fn normalize_column(col: ArrayView1<'_, f64>, out: &mut [f64]) {
    let n = col.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let denom = 2.0 * n as f64;
    let mut start = 0;
    while start < n {
        let v = col[order[start]];
        let mut end = start + 1;
        while end < n && col[order[end]] == v {
            end += 1;
        }
        // (#less + 0.5 * #equal-others) / n, kept exact as halves.
        let value = (2 * start + (end - start - 1)) as f64 / denom;
        for &i in &order[start..end] {
            out[i] = value;
        }
        start = end;
    }
}

/// Column-wise fractional rank: each entry becomes the share of entries in
/// its column that are strictly smaller, counting equal entries (other than
/// itself) as half. Results lie in `[0, 1)`.
pub fn rank_normalize(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if m.nrows() == 0 {
        return Err(Error::InvalidConfig("rank normalization of an empty matrix".into()));
    }
    if let Some(((i, j), v)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { what: "rank_normalize input", detail: format!("({i}, {j}) = {v}") });
    }
    let mut out = Array2::zeros(m.dim());
    let mut buf = vec![0.0; m.nrows()];
    for (j, col) in m.axis_iter(Axis(1)).enumerate() {
        normalize_column(col, &mut buf);
        out.column_mut(j).iter_mut().zip(&buf).for_each(|(o, b)| *o = *b);
    }
    Ok(out)
}

/// [`rank_normalize`] of a single column.
pub fn rank_normalize_vec(v: &[f64]) -> Result<Vec<f64>> {
    let m = ArrayView2::from_shape((v.len(), 1), v).expect("column shape");
    Ok(rank_normalize(m)?.into_raw_vec_and_offset().0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HValues {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub h: Vec<f64>,
}

/// h-values from the last sub-model's loss curves and the current
/// ensemble's per-sample losses.
pub fn compute_h(curves: &LossCurves, ensemble_losses: &[f64], cfg: &SrConfig) -> Result<HValues> {
    cfg.validate()?;
    let n = curves.n_samples();
    if ensemble_losses.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ensemble_losses.len(),
            context: "ensemble losses vs loss-curve rows",
        });
    }
    let negated: Vec<f64> = ensemble_losses.iter().map(|l| -l).collect();
    let h1 = rank_normalize_vec(&negated)?;

    let t = curves.n_iterations();
    let span = ceil_count(cfg.head_tail_fraction, t).clamp(1, t);
    let normalized = rank_normalize(curves.values().view())?;
    let ratio: Vec<f64> = normalized
        .rows()
        .into_iter()
        .map(|row| {
            let start = row.iter().take(span).sum::<f64>() / span as f64;
            let end = row.iter().skip(t - span).sum::<f64>() / span as f64;
            end / if start == 0.0 { START_EPS } else { start }
        })
        .collect();
    let h2 = rank_normalize_vec(&ratio)?;
    let h = h1.iter().zip(&h2).map(|(a, b)| cfg.alpha1 * a + cfg.alpha2 * b).collect();
    Ok(HValues { h1, h2, h })
}

/// Equal-count bins over h and the per-bin weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    /// Zero-based bin of each sample; bin 0 holds the smallest h-values.
    pub bin_of: Vec<usize>,
    pub bin_mean_h: Vec<f64>,
    pub weights: Vec<f64>,
    /// Set when more bins than samples were requested.
    pub bins_clamped: bool,
}

/// Sorts samples by h (ties by index), splits them into `cfg.bins`
/// equal-count bins whose sizes differ by at most one, and assigns
/// `1 / (gamma^k * mean_h_of_bin + 0.1)`.
pub fn assign_weights(h: &[f64], k: usize, cfg: &SrConfig) -> Result<Binning> {
    cfg.validate()?;
    let n = h.len();
    if n == 0 {
        return Err(Error::InvalidConfig("cannot bin zero samples".into()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("sub-model index k starts at 1".into()));
    }
    if let Some(v) = h.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "h-values", detail: v.to_string() });
    }
    let bins = cfg.bins.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h[a].total_cmp(&h[b]).then(a.cmp(&b)));

    let decay = cfg.gamma.powi(k.min(i32::MAX as usize) as i32);
    let (base, extra) = (n / bins, n % bins);
    let mut bin_of = vec![0; n];
    let mut bin_mean_h = Vec::with_capacity(bins);
    let mut weights = vec![0.0; n];
    let mut start = 0;
    for b in 0..bins {
        let size = base + usize::from(b < extra);
        let members = &order[start..start + size];
        let mean = members.iter().map(|&i| h[i]).sum::<f64>() / size as f64;
        let w = 1.0 / (decay * mean + 0.1);
        for &i in members {
            bin_of[i] = b;
            weights[i] = w;
        }
        bin_mean_h.push(mean);
        start += size;
    }
    Ok(Binning { bin_of, bin_mean_h, weights, bins_clamped: bins < cfg.bins })
}

/// Everything the reweighting step produced for one sub-model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightAssignment {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// The h-values actually binned (depends on `mode`).
    pub h: Vec<f64>,
    pub mode: HMode,
    pub k: usize,
    #[serde(flatten)]
    pub binning: Binning,
}

impl WeightAssignment {
    pub fn weights(&self) -> &[f64] {
        &self.binning.weights
    }
}

/// Full reweighting step for sub-model index `k`.
pub fn sample_reweight(
    curves: &LossCurves,
    ensemble_losses: &[f64],
    k: usize,
    cfg: &SrConfig,
    mode: HMode,
) -> Result<WeightAssignment> {
    let effective = match mode {
        HMode::Combined => cfg.clone(),
        HMode::H1Only => SrConfig { alpha2: 0.0, ..cfg.clone() },
        HMode::H2Only => SrConfig { alpha1: 0.0, ..cfg.clone() },
    };
    let HValues { h1, h2, h } = compute_h(curves, ensemble_losses, &effective)?;
    let binning = assign_weights(&h, k, cfg)?;
    Ok(WeightAssignment { h1, h2, h, mode, k, binning })
}

/// Writes `sample_index,h1,h2,h,bin,weight` rows (bins zero-based).
pub fn write_weights_csv(wa: &WeightAssignment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_index", "h1", "h2", "h", "bin", "weight"])?;
    for i in 0..wa.h.len() {
        w.write_record([
            i.to_string(),
            wa.h1[i].to_string(),
            wa.h2[i].to_string(),
            wa.h[i].to_string(),
            wa.binning.bin_of[i].to_string(),
            wa.binning.weights[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
