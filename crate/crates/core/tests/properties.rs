use double_ensemble::ensemble::{self, EnsembleConfig};
use double_ensemble::learners::gbdt::GbdtParams;
use double_ensemble::learners::mlp::MlpParams;
use double_ensemble::learners::{self, LearnerConfig};
use double_ensemble::metrics::{precision_at_fraction, retrieve, roc_auc, spearman};
use double_ensemble::reweight::{assign_weights, rank_normalize_vec, SrConfig};
use double_ensemble::{Dataset, TaskKind};
use ndarray::Array2;
use proptest::prelude::*;

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![(0u8..5).prop_map(f64::from), -10.0..10.0f64], n),
            prop::collection::vec(prop::bool::ANY.prop_map(|b| f64::from(u8::from(b))), n),
        )
            .prop_map(|(s, mut l)| {
                let n = l.len();
                l[0] = 1.0;
                l[n - 1] = 0.0;
                (s, l)
            })
    })
}

proptest! {
    #[test]
    fn auc_ignores_monotone_transforms((scores, labels) in scored_labels()) {
        let warped: Vec<f64> = scores.iter().map(|s| (s * 0.3).exp() * 2.0 + 1.0).collect();
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&warped, &labels).unwrap());
    }

    #[test]
    fn auc_of_negated_scores_is_complement((scores, labels) in scored_labels()) {
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let (a, b) = (roc_auc(&scores, &labels).unwrap(), roc_auc(&negated, &labels).unwrap());
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retrieval_keeps_everything_above_threshold(
        scores in prop::collection::vec(prop_oneof![(0u8..4).prop_map(f64::from), 0.0..1.0f64], 1..200),
        fraction in 0.001..1.0f64,
    ) {
        let r = retrieve(&scores, fraction).unwrap();
        let wanted = (fraction * scores.len() as f64).ceil() as usize;
        prop_assert!(r.retrieved.len() >= wanted.clamp(1, scores.len()));
        for (i, s) in scores.iter().enumerate() {
            prop_assert_eq!(*s >= r.threshold, r.retrieved.contains(&i));
        }
    }

    #[test]
    fn precision_is_a_share((scores, labels) in scored_labels(), fraction in 0.01..1.0f64) {
        let (p, _) = precision_at_fraction(&scores, &labels, fraction).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn spearman_is_bounded_and_sees_monotone_maps(a in prop::collection::vec(-5.0..5.0f64, 3..60)) {
        let b: Vec<f64> = a.iter().map(|x| x * x * x + 2.0 * x).collect();
        if let Some(rho) = spearman(&a, &b) {
            prop_assert!((rho - 1.0).abs() < 1e-12);
        }
        let c: Vec<f64> = a.iter().rev().copied().collect();
        if let Some(rho) = spearman(&a, &c) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        }
    }

    #[test]
    fn rank_normalization_preserves_order(v in prop::collection::vec(prop_oneof![(0u8..3).prop_map(f64::from), -1.0..1.0f64], 1..80)) {
        let r = rank_normalize_vec(&v).unwrap();
        for i in 0..v.len() {
            prop_assert!((0.0..1.0).contains(&r[i]));
            for j in 0..v.len() {
                if v[i] < v[j] { prop_assert!(r[i] < r[j]); }
                if v[i] == v[j] { prop_assert_eq!(r[i], r[j]); }
            }
        }
    }

    #[test]
    fn larger_h_never_gets_more_weight(
        h in prop::collection::vec(0.0..4.0f64, 1..150),
        k in 1usize..12,
        gamma in 0.0..=1.0f64,
        bins in 1usize..15,
    ) {
        let b = assign_weights(&h, k, &SrConfig { gamma, bins, ..Default::default() }).unwrap();
        for i in 0..h.len() {
            prop_assert!(b.weights[i] > 0.0 && b.weights[i] <= 10.0);
            for j in 0..h.len() {
                if h[i] < h[j] { prop_assert!(b.weights[i] >= b.weights[j]); }
            }
        }
    }
}

fn regression_data(n: usize, f: usize, seed: u64) -> Dataset {
    let (d, _, _) = double_ensemble::dataset::make_synthetic_regression(n, f, 0.2, seed).unwrap();
    d
}

#[test]
fn gbdt_is_invariant_to_positive_feature_scaling() {
    let d = regression_data(300, 3, 4);
    let scale = [3.0, 0.25, 1000.0];
    let mut scaled = d.features().to_owned();
    for (j, s) in scale.iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|x| x * s);
    }
    let ds = Dataset::new(scaled.clone(), d.labels().to_vec(), d.feature_names().to_vec(), d.task()).unwrap();
    let cfg = LearnerConfig::gbdt(20, GbdtParams { max_leaves: 8, ..Default::default() });
    let w = vec![1.0; d.n_samples()];
    let (a, _) = learners::train(&d, &w, &[0, 1, 2], &cfg, 1).unwrap();
    let (b, _) = learners::train(&ds, &w, &[0, 1, 2], &cfg, 1).unwrap();
    let (pa, pb) = (a.predict(d.features()).unwrap(), b.predict(scaled.view()).unwrap());
    for (x, y) in pa.iter().zip(&pb) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn gbdt_training_loss_decreases() {
    let d = regression_data(400, 4, 9);
    let cfg = LearnerConfig::gbdt(30, GbdtParams::default());
    let (_, curves) = learners::train(&d, &vec![1.0; 400], &[0, 1, 2, 3], &cfg, 2).unwrap();
    let means: Vec<f64> = curves.values().columns().into_iter().map(|c| c.mean().unwrap()).collect();
    assert_eq!(means.len(), 30);
    assert!(means.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn ridge_training_loss_falls_on_clean_data() {
    let (d, _, _) = double_ensemble::dataset::make_synthetic_regression(300, 4, 0.0, 6).unwrap();
    let cfg = LearnerConfig::ridge(5, double_ensemble::learners::ridge::RidgeParams::default());
    let (_, curves) = learners::train(&d, &vec![1.0; 300], &[0, 1, 2, 3], &cfg, 0).unwrap();
    let mean = |t: usize| curves.values().column(t).mean().unwrap();
    assert!(mean(4) < mean(0));
}

#[test]
fn mlp_training_loss_falls_overall() {
    let task = double_ensemble::dataset::make_synthetic_classification(400, 3, 1, 0.2, 5).unwrap();
    let cfg = LearnerConfig::mlp(30, MlpParams { hidden_sizes: vec![8], learning_rate: 0.05, batch_size: 32 });
    let (_, curves) = learners::train(&task.dataset, &vec![1.0; 400], &[0, 1, 2, 3], &cfg, 3).unwrap();
    let mean = |t: usize| curves.values().column(t).mean().unwrap();
    assert!(mean(29) < mean(0));
}

#[test]
fn ensemble_prediction_is_member_average() {
    let d = regression_data(250, 4, 1);
    let mut cfg = EnsembleConfig {
        sub_models: 3,
        learner: LearnerConfig::gbdt(10, GbdtParams { max_leaves: 6, ..Default::default() }),
        ..Default::default()
    };
    cfg.fs.repeats = 1;
    let state = ensemble::fit(&d, &cfg).unwrap();
    assert_eq!(state.k_built(), 3);
    let rows = d.features();
    let members: Vec<Vec<f64>> = state.sub_models.iter().map(|s| s.model.predict(rows).unwrap()).collect();
    let combined = state.predict(rows).unwrap();
    for (i, c) in combined.iter().enumerate() {
        let mean = members.iter().map(|m| m[i]).sum::<f64>() / 3.0;
        assert!((c - mean).abs() <= 1e-12);
    }
}

#[test]
fn ensemble_fit_is_deterministic_and_round_trips() {
    let d = regression_data(200, 3, 2);
    let cfg = EnsembleConfig {
        sub_models: 2,
        learner: LearnerConfig::gbdt(8, GbdtParams { max_leaves: 4, ..Default::default() }),
        master_seed: 17,
        ..Default::default()
    };
    let a = ensemble::fit(&d, &cfg).unwrap();
    let b = ensemble::fit(&d, &cfg).unwrap();
    let json = a.to_json().unwrap();
    assert_eq!(json, b.to_json().unwrap());
    let back = ensemble::EnsembleState::from_json(&json).unwrap();
    assert_eq!(back.predict(d.features()).unwrap(), a.predict(d.features()).unwrap());
}

#[test]
fn ensemble_rejects_wrong_width_rows() {
    let d = regression_data(100, 3, 3);
    let cfg = EnsembleConfig {
        sub_models: 1,
        learner: LearnerConfig::gbdt(3, GbdtParams::default()),
        ..Default::default()
    };
    let state = ensemble::fit(&d, &cfg).unwrap();
    let narrow = Array2::<f64>::zeros((2, 2));
    assert!(state.predict(narrow.view()).is_err());
    assert_eq!(state.task, TaskKind::Regression);
}
