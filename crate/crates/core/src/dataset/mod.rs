//! Datasets, populations, CSV ingestion and synthetic generators.

mod io;
pub(crate) mod noise;
mod synthetic;

pub use io::{load_csv, read_matrix, write_csv, write_population_csv};
pub use noise::inject_noise;
pub use synthetic::{
    classification_latent, make_synthetic_classification, make_synthetic_regression,
    make_toy_classification, regression_target, sample_synthetic_classification, toy_signed_distance,
    SyntheticClassification,
    KINK_AT, KINK_SCALE, RETURN_SCALE,
};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    BinaryClassification,
}

/// Where a feature column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureOrigin {
    Original,
    InjectedRandom,
}

/// Feature matrix (rows are samples) plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<f64>,
    feature_names: Vec<String>,
    feature_origin: Vec<FeatureOrigin>,
    task: TaskKind,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<f64>,
        feature_names: Vec<String>,
        task: TaskKind,
    ) -> Result<Self> {
        let origin = vec![FeatureOrigin::Original; feature_names.len()];
        Self::with_origin(features, labels, feature_names, origin, task)
    }

    pub fn with_origin(
        features: Array2<f64>,
        labels: Vec<f64>,
        feature_names: Vec<String>,
        feature_origin: Vec<FeatureOrigin>,
        task: TaskKind,
    ) -> Result<Self> {
        let (n, f) = features.dim();
        if n == 0 || f == 0 {
            return Err(Error::InvalidDataset(format!(
                "need at least one sample and one feature, got {n}x{f}"
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
                context: "label count",
            });
        }
        if feature_names.len() != f || feature_origin.len() != f {
            return Err(Error::DimensionMismatch {
                expected: f,
                found: feature_names.len(),
                context: "feature name count",
            });
        }
        let mut seen = std::collections::HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate feature name `{name}`")));
            }
        }
        if let Some(((row, col), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "features",
                detail: format!("row {row}, column `{}` = {v}", feature_names[col]),
            });
        }
        for (row, &y) in labels.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::NonFinite {
                    what: "labels",
                    detail: format!("row {row} = {y}"),
                });
            }
            if task == TaskKind::BinaryClassification && y != 0.0 && y != 1.0 {
                return Err(Error::NonBinaryLabel { row, value: y });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            feature_origin,
            task,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_origin(&self) -> &[FeatureOrigin] {
        &self.feature_origin
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    /// Indices of the columns that were appended by [`inject_noise`].
    pub fn injected_features(&self) -> Vec<usize> {
        self.feature_origin
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == FeatureOrigin::InjectedRandom)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy of the dataset with different labels, e.g. for relabelling checks.
    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        Self::with_origin(
            self.features.clone(),
            labels,
            self.feature_names.clone(),
            self.feature_origin.clone(),
            self.task,
        )
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let features = self.features.select(ndarray::Axis(0), rows);
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self::with_origin(
            features,
            labels,
            self.feature_names.clone(),
            self.feature_origin.clone(),
            self.task,
        )
    }
}

/// Generating population of each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleTag {
    Easy,
    Hard,
    Noisy,
    InjectedRandom,
    Clean,
}

impl SampleTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleTag::Easy => "easy",
            SampleTag::Hard => "hard",
            SampleTag::Noisy => "noisy",
            SampleTag::InjectedRandom => "injected_random",
            SampleTag::Clean => "clean",
        }
    }
}

impl std::fmt::Display for SampleTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePopulation {
    tags: Vec<SampleTag>,
}

impl SamplePopulation {
    pub fn new(tags: Vec<SampleTag>) -> Self {
        Self { tags }
    }

    pub fn uniform(tag: SampleTag, n: usize) -> Self {
        Self { tags: vec![tag; n] }
    }

    pub fn tags(&self) -> &[SampleTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn count(&self, tag: SampleTag) -> usize {
        self.tags.iter().filter(|t| **t == tag).count()
    }

    /// Tags present, in enum order.
    pub fn present(&self) -> Vec<SampleTag> {
        let mut tags = self.tags.clone();
        tags.sort();
        tags.dedup();
        tags
    }

    pub(crate) fn extended(&self, tag: SampleTag, extra: usize) -> Self {
        let mut tags = self.tags.clone();
        tags.extend(std::iter::repeat_n(tag, extra));
        Self { tags }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn rejects_non_binary_classification_labels() {
        let err = Dataset::new(
            array![[1.0], [2.0]],
            vec![0.0, 0.5],
            names(1),
            TaskKind::BinaryClassification,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonBinaryLabel { row: 1, .. }));
    }

    #[test]
    fn rejects_duplicate_names_and_nan() {
        assert!(Dataset::new(
            array![[1.0, 2.0]],
            vec![0.0],
            vec!["a".into(), "a".into()],
            TaskKind::Regression
        )
        .is_err());
        assert!(Dataset::new(
            array![[f64::NAN]],
            vec![0.0],
            names(1),
            TaskKind::Regression
        )
        .is_err());
    }

    #[test]
    fn rejects_empty() {
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(Dataset::new(empty, vec![], names(2), TaskKind::Regression).is_err());
    }
}
