//! Synthetic tasks: the two-population toy classification problem, a noisy
//! regression task with a known generator, and a low signal-to-noise
//! classification task that carries per-sample forward returns.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, SamplePopulation, SampleTag, TaskKind};
use crate::error::{Error, Result};
use crate::seed::{self, stream};

/// Height of the hinge term `KINK_SCALE * max(x0 - KINK_AT, 0)` added to
/// every synthetic target.
pub const KINK_SCALE: f64 = 2.0;
pub const KINK_AT: f64 = 0.5;
/// Converts the classification latent into a forward return.
pub const RETURN_SCALE: f64 = 1e-3;

fn feature_names(f: usize) -> Vec<String> {
    (0..f).map(|j| format!("x{j}")).collect()
}

/// Signed distance of `(x1, x2)` to the toy boundary `x2 = x1`; positive
/// on the label-1 side.
pub fn toy_signed_distance(x1: f64, x2: f64) -> f64 {
    (x2 - x1) / std::f64::consts::SQRT_2
}

/// Toy binary task on `[-1, 1]^2` with a diagonal true boundary.
///
/// Easy samples sit at least `margin` away from the boundary, hard samples
/// within `margin / 4` of it; both carry the correct label. Noisy samples are
/// uniform with a fair-coin label. Samples are laid out easy, hard, noisy.
pub fn make_toy_classification(
    n_easy: usize,
    n_hard: usize,
    n_noisy: usize,
    margin: f64,
    seed: u64,
) -> Result<(Dataset, SamplePopulation)> {
    let n = n_easy + n_hard + n_noisy;
    if n == 0 {
        return Err(Error::InvalidConfig("toy task needs at least one sample".into()));
    }
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "toy margin must be in (0, 1], got {margin}"
        )));
    }
    let mut rng = seed::rng(seed, &[]);
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut tags = Vec::with_capacity(n);

    let point = |rng: &mut rand_chacha::ChaCha8Rng| {
        (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
    };
    let mut row = 0;
    let mut push = |x: (f64, f64), y: f64, tag: SampleTag| {
        features[[row, 0]] = x.0;
        features[[row, 1]] = x.1;
        labels.push(y);
        tags.push(tag);
        row += 1;
    };
    let side = |x: (f64, f64)| f64::from(u8::from(toy_signed_distance(x.0, x.1) > 0.0));

    for _ in 0..n_easy {
        let x = loop {
            let x = point(&mut rng);
            if toy_signed_distance(x.0, x.1).abs() >= margin {
                break x;
            }
        };
        push(x, side(x), SampleTag::Easy);
    }
    for _ in 0..n_hard {
        let x = loop {
            let x = point(&mut rng);
            let d = toy_signed_distance(x.0, x.1);
            if d.abs() < margin / 4.0 && d != 0.0 {
                break x;
            }
        };
        push(x, side(x), SampleTag::Hard);
    }
    for _ in 0..n_noisy {
        let x = point(&mut rng);
        let y = f64::from(u8::from(rng.random_bool(0.5)));
        push(x, y, SampleTag::Noisy);
    }

    let d = Dataset::new(features, labels, feature_names(2), TaskKind::BinaryClassification)?;
    Ok((d, SamplePopulation::new(tags)))
}

/// Noise-free regression target for one row.
pub fn regression_target(row: &[f64], coefficients: &[f64]) -> f64 {
    let linear: f64 = row.iter().zip(coefficients).map(|(x, c)| x * c).sum();
    linear + KINK_SCALE * (row[0] - KINK_AT).max(0.0)
}

/// Regression on `f_informative` uniform features:
/// `y = sum_j c_j x_j + KINK_SCALE * max(x_0 - KINK_AT, 0) + N(0, noise_std^2)`.
///
/// Coefficients have magnitude in `[0.5, 1.5]` and a random sign; they are
/// returned so tests can rebuild the target.
pub fn make_synthetic_regression(
    n: usize,
    f_informative: usize,
    noise_std: f64,
    seed: u64,
) -> Result<(Dataset, SamplePopulation, Vec<f64>)> {
    if n == 0 || f_informative == 0 {
        return Err(Error::InvalidConfig(
            "synthetic regression needs n >= 1 and f_informative >= 1".into(),
        ));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let mut rng = seed::rng(seed, &[]);
    let coefficients = draw_coefficients(&mut rng, f_informative);
    let features = Array2::from_shape_simple_fn((n, f_informative), || rng.random::<f64>());
    let noise = Normal::new(0.0, noise_std).expect("validated std");
    let labels = features
        .rows()
        .into_iter()
        .map(|row| {
            let y = regression_target(row.as_slice().expect("standard layout"), &coefficients);
            if noise_std > 0.0 {
                y + noise.sample(&mut rng)
            } else {
                y
            }
        })
        .collect();
    let d = Dataset::new(features, labels, feature_names(f_informative), TaskKind::Regression)?;
    Ok((d, SamplePopulation::uniform(SampleTag::Clean, n), coefficients))
}

fn draw_coefficients(rng: &mut impl Rng, f: usize) -> Vec<f64> {
    (0..f)
        .map(|_| {
            let magnitude = rng.random_range(0.5..=1.5);
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SyntheticClassification {
    pub dataset: Dataset,
    pub population: SamplePopulation,
    /// Forward return of each sample; positive exactly when the label is 1.
    pub returns: Vec<f64>,
    pub coefficients: Vec<f64>,
}

/// Centered noise-free latent of the classification task.
pub fn classification_latent(row: &[f64], coefficients: &[f64]) -> f64 {
    let linear: f64 = row.iter().zip(coefficients).map(|(x, c)| (x - 0.5) * c).sum();
    // E[max(U - 0.5, 0)] = 1/8 for U ~ U[0, 1].
    linear + KINK_SCALE * ((row[0] - KINK_AT).max(0.0) - 0.125)
}

/// Binary task with `f_informative` useful and `f_uninformative` irrelevant
/// uniform features. The label is the sign of the latent plus Gaussian noise,
/// and the same noisy latent scaled by [`RETURN_SCALE`] is the sample's
/// forward return.
pub fn make_synthetic_classification(
    n: usize,
    f_informative: usize,
    f_uninformative: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticClassification> {
    if f_informative == 0 {
        return Err(Error::InvalidConfig(
            "synthetic classification needs f_informative >= 1".into(),
        ));
    }
    let mut coefficients = draw_coefficients(&mut seed::rng(seed, &[stream::COEFFICIENTS]), f_informative);
    coefficients.resize(f_informative + f_uninformative, 0.0);
    sample_synthetic_classification(&coefficients, n, noise_std, seed)
}

/// Draws `n` fresh rows of the classification task defined by
/// `coefficients` (one per feature, zero for irrelevant ones).
///
/// Calling this with the coefficients of an existing task and another seed
/// gives an independent sample from the same distribution.
pub fn sample_synthetic_classification(
    coefficients: &[f64],
    n: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticClassification> {
    if n == 0 || coefficients.is_empty() {
        return Err(Error::InvalidConfig(
            "synthetic classification needs n >= 1 and at least one feature".into(),
        ));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let f = coefficients.len();
    let mut rng = seed::rng(seed, &[]);
    let features = Array2::from_shape_simple_fn((n, f), || rng.random::<f64>());
    let noise = Normal::new(0.0, noise_std).expect("validated std");
    let mut labels = Vec::with_capacity(n);
    let mut returns = Vec::with_capacity(n);
    for row in features.rows() {
        let mut latent = classification_latent(row.as_slice().expect("standard layout"), coefficients);
        if noise_std > 0.0 {
            latent += noise.sample(&mut rng);
        }
        labels.push(f64::from(u8::from(latent > 0.0)));
        returns.push(RETURN_SCALE * latent);
    }
    let dataset = Dataset::new(features, labels, feature_names(f), TaskKind::BinaryClassification)?;
    Ok(SyntheticClassification {
        dataset,
        population: SamplePopulation::uniform(SampleTag::Clean, n),
        returns,
        coefficients: coefficients.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_counts_and_shape() {
        let (d, pop) = make_toy_classification(100, 100, 50, 0.3, 7).unwrap();
        assert_eq!(d.n_samples(), 250);
        assert_eq!(d.n_features(), 2);
        assert_eq!(pop.count(SampleTag::Noisy), 50);
        assert_eq!(pop.count(SampleTag::Easy), 100);
    }

    #[test]
    fn toy_easy_samples_respect_margin() {
        let (d, pop) = make_toy_classification(10, 0, 0, 0.3, 3).unwrap();
        assert!(pop.tags().iter().all(|t| *t == SampleTag::Easy));
        for (row, &y) in d.features().rows().into_iter().zip(d.labels()) {
            let dist = toy_signed_distance(row[0], row[1]);
            assert!(dist.abs() >= 0.3);
            assert_eq!(y, if dist > 0.0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn toy_hard_samples_hug_the_boundary() {
        let (d, _) = make_toy_classification(0, 40, 0, 0.4, 3).unwrap();
        for row in d.features().rows() {
            assert!(toy_signed_distance(row[0], row[1]).abs() < 0.1);
        }
    }

    #[test]
    fn toy_is_deterministic() {
        let a = make_toy_classification(20, 20, 20, 0.3, 11).unwrap();
        let b = make_toy_classification(20, 20, 20, 0.3, 11).unwrap();
        assert_eq!(a, b);
        let c = make_toy_classification(20, 20, 20, 0.3, 12).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn toy_rejects_empty() {
        assert!(make_toy_classification(0, 0, 0, 0.3, 1).is_err());
    }

    #[test]
    fn noise_free_regression_is_exact() {
        let (d, _, coefs) = make_synthetic_regression(50, 1, 0.0, 5).unwrap();
        for (row, &y) in d.features().rows().into_iter().zip(d.labels()) {
            let expected = coefs[0] * row[0] + KINK_SCALE * (row[0] - KINK_AT).max(0.0);
            assert_eq!(y, expected);
        }
    }

    #[test]
    fn regression_is_deterministic() {
        let a = make_synthetic_regression(30, 3, 0.1, 9).unwrap();
        let b = make_synthetic_regression(30, 3, 0.1, 9).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn regression_label_variance_exceeds_noise_variance() {
        let (d, _, _) = make_synthetic_regression(1000, 5, 0.1, 21).unwrap();
        let y = d.labels();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
        // Five coefficients of magnitude >= 0.5 on U[0,1] inputs contribute at
        // least 5 * 0.25 / 12 ~ 0.10 of variance, far above 0.01.
        assert!(var > 0.01, "variance {var}");
    }

    #[test]
    fn classification_returns_agree_with_labels() {
        let task = make_synthetic_classification(500, 4, 3, 0.5, 2).unwrap();
        assert_eq!(task.dataset.n_features(), 7);
        assert_eq!(&task.coefficients[4..], &[0.0, 0.0, 0.0]);
        for (&r, &y) in task.returns.iter().zip(task.dataset.labels()) {
            assert_eq!(y == 1.0, r > 0.0);
        }
        let positives = task.dataset.labels().iter().sum::<f64>();
        assert!(positives > 100.0 && positives < 400.0, "{positives}");
    }

    #[test]
    fn fresh_sample_keeps_the_task() {
        let train = make_synthetic_classification(50, 3, 2, 0.5, 4).unwrap();
        let test = sample_synthetic_classification(&train.coefficients, 30, 0.5, 99).unwrap();
        assert_eq!(test.coefficients, train.coefficients);
        assert_eq!(test.dataset.n_samples(), 30);
        assert_ne!(test.dataset.features().row(0), train.dataset.features().row(0));
    }
}
