use ndarray::{concatenate, Array2, Axis};
use rand::Rng;

use super::{Dataset, FeatureOrigin, SamplePopulation, SampleTag};
use crate::error::{Error, Result};
use crate::seed::{self, stream};

/// Appends `extra_random_features` columns of U[0,1] noise and
/// `ceil(random_sample_fraction * N)` rows whose features are all U[0,1].
///
/// Labels of the new rows are resampled from the original labels, so a
/// classification dataset stays binary. Original cells are untouched; new
/// columns are named `rand_<j>` (suffixed with `_` until unique) and new rows
/// are tagged [`SampleTag::Noisy`].
pub fn inject_noise(
    d: &Dataset,
    pop: &SamplePopulation,
    extra_random_features: usize,
    random_sample_fraction: f64,
    seed: u64,
) -> Result<(Dataset, SamplePopulation)> {
    if !(0.0..=1.0).contains(&random_sample_fraction) {
        return Err(Error::InvalidConfig(format!(
            "random sample fraction must be in [0, 1], got {random_sample_fraction}"
        )));
    }
    if pop.len() != d.n_samples() {
        return Err(Error::DimensionMismatch {
            expected: d.n_samples(),
            found: pop.len(),
            context: "population tags",
        });
    }
    let n = d.n_samples();
    let f = d.n_features();
    let extra_rows = ceil_count(random_sample_fraction, n);

    let mut col_rng = seed::rng(seed, &[stream::NOISE_FEATURES]);
    let new_cols = Array2::from_shape_simple_fn((n, extra_random_features), || {
        col_rng.random::<f64>()
    });
    let widened = concatenate(Axis(1), &[d.features(), new_cols.view()])
        .expect("row counts agree");

    let mut row_rng = seed::rng(seed, &[stream::NOISE_SAMPLES]);
    let new_rows =
        Array2::from_shape_simple_fn((extra_rows, f + extra_random_features), || {
            row_rng.random::<f64>()
        });
    let features = concatenate(Axis(0), &[widened.view(), new_rows.view()])
        .expect("column counts agree");

    let mut label_rng = seed::rng(seed, &[stream::NOISE_LABELS]);
    let mut labels = d.labels().to_vec();
    labels.extend((0..extra_rows).map(|_| d.labels()[label_rng.random_range(0..n)]));

    let mut names = d.feature_names().to_vec();
    for j in 0..extra_random_features {
        let mut name = format!("rand_{j}");
        while names.contains(&name) {
            name.push('_');
        }
        names.push(name);
    }
    let mut origin = d.feature_origin().to_vec();
    origin.extend(std::iter::repeat_n(FeatureOrigin::InjectedRandom, extra_random_features));

    let noisy = Dataset::with_origin(features, labels, names, origin, d.task())?;
    Ok((noisy, pop.extended(SampleTag::Noisy, extra_rows)))
}

/// `ceil(fraction * n)`, ignoring representation error just above an integer.
pub(crate) fn ceil_count(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        exact.ceil() as usize
    }
}
