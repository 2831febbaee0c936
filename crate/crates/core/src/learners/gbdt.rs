//! Gradient-boosted regression trees.
//!
//! Trees grow leaf-wise: the leaf whose best split has the largest gain is
//! split next, until `max_leaves` is reached or no split helps. Split search
//! is exact over the raw feature values, driven by per-feature index lists
//! that are sorted once per fit and partitioned stably as leaves split.
//! Squared error boosts on first-order residuals; log-loss uses the Newton
//! step `-G / H`. Sample weights multiply both gradients and hessians, so a
//! weight of 2 is the same as a duplicated row.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::sigmoid;
use super::{BaseLearner, CurveRecorder, Predictor};
use crate::dataset::TaskKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub max_leaves: usize,
    pub learning_rate: f64,
    /// Minimum number of rows (not weight) on each side of a split.
    pub min_samples_leaf: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self { max_leaves: 32, learning_rate: 0.1, min_samples_leaf: 20 }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("gbdt max_leaves and min_samples_leaf must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gbdt learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    idx = if row[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub task: TaskKind,
}

impl GbdtModel {
    fn raw(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

impl Predictor for GbdtModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let mut buf = Vec::with_capacity(x.ncols());
        x.rows()
            .into_iter()
            .map(|row| {
                buf.clear();
                buf.extend(row.iter().copied());
                let raw = self.raw(&buf);
                match self.task {
                    TaskKind::Regression => raw,
                    TaskKind::BinaryClassification => sigmoid(raw),
                }
            })
            .collect()
    }
}

/// Relative gap below which two gains count as tied.
const GAIN_TIE: f64 = 1e-9;

/// Whether `gain` is better than `incumbent` by more than rounding noise, so
/// that tied splits resolve the same way whatever order the sums were
/// accumulated in.
fn beats(gain: f64, incumbent: f64) -> bool {
    gain > incumbent + GAIN_TIE * incumbent.abs()
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct GrowingLeaf {
    node: usize,
    /// Row indices of this leaf, one list per feature, each sorted by that
    /// feature's value.
    rows: Vec<Vec<u32>>,
    grad: f64,
    hess: f64,
    best: Option<SplitCandidate>,
}

struct TreeContext<'a> {
    columns: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    min_samples_leaf: usize,
    hess_floor: f64,
    gain_floor: f64,
}

impl TreeContext<'_> {
    fn best_split(&self, rows: &[Vec<u32>], g_tot: f64, h_tot: f64) -> Option<SplitCandidate> {
        let n_leaf = rows[0].len();
        if n_leaf < 2 * self.min_samples_leaf {
            return None;
        }
        let parent = g_tot * g_tot / h_tot;
        let scan = |feature: usize| -> Option<SplitCandidate> {
            let order = &rows[feature];
            let col = &self.columns[feature];
            let mut best: Option<SplitCandidate> = None;
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..n_leaf - 1 {
                let r = order[k] as usize;
                gl += self.grad[r];
                hl += self.hess[r];
                let (v, next) = (col[r], col[order[k + 1] as usize]);
                let n_left = k + 1;
                if n_left < self.min_samples_leaf || next <= v {
                    continue;
                }
                if n_leaf - n_left < self.min_samples_leaf {
                    break;
                }
                let (gr, hr) = (g_tot - gl, h_tot - hl);
                if hl <= self.hess_floor || hr <= self.hess_floor {
                    continue;
                }
                let gain = gl * gl / hl + gr * gr / hr - parent;
                if gain > self.gain_floor && best.is_none_or(|b| beats(gain, b.gain)) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(SplitCandidate { gain, feature, threshold });
                }
            }
            best
        };
        let per_feature: Vec<Option<SplitCandidate>> = if n_leaf * rows.len() > 50_000 {
            (0..rows.len()).into_par_iter().map(scan).collect()
        } else {
            (0..rows.len()).map(scan).collect()
        };
        // Ties go to the lower feature index.
        per_feature.into_iter().flatten().fold(None, |acc: Option<SplitCandidate>, c| match acc {
            Some(a) if !beats(c.gain, a.gain) => Some(a),
            _ => Some(c),
        })
    }

    fn sums(&self, rows: &[u32]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        })
    }
}

/// Grows one tree; returns it with the rows that landed in each leaf and the
/// (already shrunken) leaf value.
fn grow_tree(
    ctx: &TreeContext<'_>,
    sorted: &[Vec<u32>],
    max_leaves: usize,
    learning_rate: f64,
) -> (Tree, Vec<(Vec<u32>, f64)>) {
    let (g, h) = ctx.sums(&sorted[0]);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let root_rows = sorted.to_vec();
    let best = if max_leaves > 1 { ctx.best_split(&root_rows, g, h) } else { None };
    let mut leaves = vec![GrowingLeaf { node: 0, rows: root_rows, grad: g, hess: h, best }];
    let mut goes_left = vec![false; ctx.grad.len()];

    while leaves.len() < max_leaves {
        let pick = leaves
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.best.map(|b| (i, b.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (i, gain)| match acc {
                Some((_, g)) if !beats(gain, g) => acc,
                _ => Some((i, gain)),
            });
        let Some((i, _)) = pick else { break };
        let leaf = leaves.swap_remove(i);
        let split = leaf.best.expect("picked leaves have a split");
        let col = &ctx.columns[split.feature];
        for &r in &leaf.rows[0] {
            goes_left[r as usize] = col[r as usize] <= split.threshold;
        }
        let (left_rows, right_rows): (Vec<Vec<u32>>, Vec<Vec<u32>>) = leaf
            .rows
            .into_iter()
            .map(|list| list.into_iter().partition(|&r| goes_left[r as usize]))
            .unzip();

        let left_node = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left_node as u32,
            right: left_node as u32 + 1,
        };
        let full = leaves.len() + 2 >= max_leaves;
        for (offset, rows) in [left_rows, right_rows].into_iter().enumerate() {
            let (g, h) = ctx.sums(&rows[0]);
            let best = if full { None } else { ctx.best_split(&rows, g, h) };
            leaves.push(GrowingLeaf { node: left_node + offset, rows, grad: g, hess: h, best });
        }
    }

    let mut assignments = Vec::with_capacity(leaves.len());
    for leaf in leaves {
        let value = -learning_rate * leaf.grad / leaf.hess;
        nodes[leaf.node] = Node::Leaf { value };
        let mut rows = leaf.rows;
        assignments.push((rows.swap_remove(0), value));
    }
    (Tree { nodes }, assignments)
}

impl BaseLearner for GbdtParams {
    type Model = GbdtModel;

    fn fit(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[f64],
        weights: &[f64],
        task: TaskKind,
        iterations: usize,
        _seed: u64,
        curves: &mut CurveRecorder<'_>,
    ) -> Result<GbdtModel> {
        self.validate()?;
        let n = x.nrows();
        let columns: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let sorted: Vec<Vec<u32>> = columns
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let total_w: f64 = weights.iter().sum();
        let mean_y = weights.iter().zip(labels).map(|(w, y)| w * y).sum::<f64>() / total_w;
        let base_score = match task {
            TaskKind::Regression => mean_y,
            TaskKind::BinaryClassification => {
                let p = mean_y.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
        };

        let mut raw = vec![base_score; n];
        let mut output = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut trees = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            for i in 0..n {
                let (g, h) = match task {
                    TaskKind::Regression => (raw[i] - labels[i], 1.0),
                    TaskKind::BinaryClassification => {
                        let p = sigmoid(raw[i]);
                        (p - labels[i], (p * (1.0 - p)).max(1e-16))
                    }
                };
                grad[i] = weights[i] * g;
                hess[i] = weights[i] * h;
            }
            let h_tot: f64 = hess.iter().sum();
            let score: f64 = grad
                .iter()
                .zip(&hess)
                .filter(|(_, h)| **h > 0.0)
                .map(|(g, h)| g * g / h)
                .sum();
            let ctx = TreeContext {
                columns: &columns,
                grad: &grad,
                hess: &hess,
                min_samples_leaf: self.min_samples_leaf,
                hess_floor: 1e-12 * h_tot,
                gain_floor: (1e-12 * score).max(f64::MIN_POSITIVE),
            };
            let (tree, assignments) = grow_tree(&ctx, &sorted, self.max_leaves, self.learning_rate);
            for (rows, value) in assignments {
                for r in rows {
                    raw[r as usize] += value;
                }
            }
            trees.push(tree);
            for (o, &r) in output.iter_mut().zip(&raw) {
                *o = match task {
                    TaskKind::Regression => r,
                    TaskKind::BinaryClassification => sigmoid(r),
                };
            }
            if !curves.record(&output)? {
                break;
            }
        }
        Ok(GbdtModel { base_score, trees, task })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn fit(x: &Array2<f64>, y: &[f64], w: &[f64], task: TaskKind, params: GbdtParams, t: usize) -> (GbdtModel, super::super::LossCurves) {
        let mut rec = CurveRecorder::new(y, w, task, None);
        let m = params.fit(x.view(), y, w, task, t, 0, &mut rec).unwrap();
        (m, rec.finish().unwrap())
    }

    #[test]
    fn single_split_recovers_step_function() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 3.0 }).collect();
        let w = vec![1.0; 10];
        let params = GbdtParams { max_leaves: 2, learning_rate: 1.0, min_samples_leaf: 1 };
        let (m, _) = fit(&x, &y, &w, TaskKind::Regression, params, 1);
        assert_eq!(m.trees[0].n_leaves(), 2);
        match m.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 4.5);
            }
            _ => panic!("expected a split"),
        }
        let p = m.predict(x.view());
        for (p, y) in p.iter().zip(&y) {
            assert!((p - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tied_splits_go_to_the_lower_feature_whatever_the_weights() {
        // Feature 1 reverses feature 0, so both admit the same best partition.
        let x = Array2::from_shape_fn((8, 2), |(i, j)| if j == 0 { i as f64 } else { 7.0 - i as f64 });
        let y: Vec<f64> = (0..8).map(|i| if i < 4 { 0.3 } else { 1.7 }).collect();
        let params = GbdtParams { max_leaves: 2, learning_rate: 1.0, min_samples_leaf: 1 };
        for w in [vec![1.0; 8], vec![3.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 3.0]] {
            let (m, _) = fit(&x, &y, &w, TaskKind::Regression, params, 1);
            assert!(matches!(m.trees[0].nodes[0], Node::Split { feature: 0, .. }));
        }
    }

    #[test]
    fn leaves_capped() {
        let x = Array2::from_shape_fn((200, 3), |(i, j)| ((i * 7 + j * 13) % 41) as f64);
        let y: Vec<f64> = (0..200).map(|i| (i % 9) as f64).collect();
        let w = vec![1.0; 200];
        let params = GbdtParams { max_leaves: 5, learning_rate: 0.3, min_samples_leaf: 3 };
        let (m, curves) = fit(&x, &y, &w, TaskKind::Regression, params, 4);
        assert!(m.trees.iter().all(|t| t.n_leaves() <= 5));
        assert_eq!(curves.n_iterations(), 4);
    }

    #[test]
    fn respects_min_samples_leaf() {
        let x = Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
        let y = vec![0.0, 0.0, 0.0, 0.0, 0.0, 10.0];
        let w = vec![1.0; 6];
        let params = GbdtParams { max_leaves: 8, learning_rate: 1.0, min_samples_leaf: 3 };
        let (m, _) = fit(&x, &y, &w, TaskKind::Regression, params, 1);
        assert_eq!(m.trees[0].n_leaves(), 2);
        match m.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 2.5),
            _ => panic!(),
        }
    }

    #[test]
    fn classification_scores_are_probabilities() {
        let x = Array2::from_shape_fn((100, 2), |(i, j)| ((i * (j + 3)) % 17) as f64);
        let y: Vec<f64> = (0..100).map(|i| f64::from(u8::from((i * 3) % 17 > 8))).collect();
        let w = vec![1.0; 100];
        let (m, curves) = fit(&x, &y, &w, TaskKind::BinaryClassification, GbdtParams { min_samples_leaf: 2, ..Default::default() }, 20);
        assert!(m.predict(x.view()).iter().all(|&p| p > 0.0 && p < 1.0));
        let first: f64 = curves.values().column(0).sum();
        let last: f64 = curves.values().column(19).sum();
        assert!(last < first);
    }

    #[test]
    fn zero_weight_rows_do_not_move_leaves() {
        let x = Array2::from_shape_fn((8, 1), |(i, _)| i as f64);
        let y = vec![1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 100.0];
        let mut w = vec![1.0; 8];
        w[7] = 0.0;
        let params = GbdtParams { max_leaves: 2, learning_rate: 1.0, min_samples_leaf: 1 };
        let (m, _) = fit(&x, &y, &w, TaskKind::Regression, params, 1);
        let p = m.predict(x.view());
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!((p[5] - 5.0).abs() < 1e-12);
    }
}
