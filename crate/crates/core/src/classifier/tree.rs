use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ProbabilisticClassifier;
use crate::dataset::Matrix;
use crate::error::{Error, Result};

const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Number of non-constant features examined per split.
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

/// Node of a fitted tree. Children are indices into [`DecisionTree::nodes`];
/// rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        histogram: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_classes: usize,
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Weighted class histogram of the leaf `row` falls into.
    pub fn leaf_histogram(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { histogram } => return histogram,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

impl ProbabilisticClassifier for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let h = self.leaf_histogram(row);
        let total: f64 = h.iter().sum();
        h.iter().map(|c| c / total).collect()
    }
}

struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Builder<'a, R> {
    x: &'a Matrix,
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<TreeNode>,
}

/// Fits a CART tree with weighted Gini impurity.
///
/// Rows with zero weight are ignored. At each node features are visited in
/// a random order until `max_features` non-constant ones have been scored;
/// among equal gains the lowest feature index, then the lowest threshold,
/// wins. Thresholds sit halfway between consecutive distinct values.
pub fn fit_tree<R: Rng>(
    x: &Matrix,
    y: &[usize],
    weights: &[f64],
    n_classes: usize,
    params: TreeParams,
    rng: &mut R,
) -> Result<DecisionTree> {
    if y.len() != x.n_rows() || weights.len() != x.n_rows() {
        return Err(Error::InvalidParameter("x, y and weights differ in length".into()));
    }
    if params.max_features == 0 || params.min_samples_split < 2 {
        return Err(Error::InvalidParameter(
            "max_features must be >= 1 and min_samples_split >= 2".into(),
        ));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be finite and >= 0".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {bad} >= n_classes {n_classes}")));
    }
    let rows: Vec<usize> = (0..x.n_rows()).filter(|&i| weights[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::Empty("no rows with positive weight".into()));
    }
    let mut b = Builder {
        x,
        y,
        w: weights,
        n_classes,
        params,
        rng,
        nodes: Vec::new(),
    };
    b.build(rows, 0);
    Ok(DecisionTree {
        n_classes,
        n_features: x.n_cols(),
        nodes: b.nodes,
    })
}

impl<R: Rng> Builder<'_, R> {
    fn histogram(&self, rows: &[usize]) -> Vec<f64> {
        let mut h = vec![0.0; self.n_classes];
        for &i in rows {
            h[self.y[i]] += self.w[i];
        }
        h
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let histogram = self.histogram(&rows);
        self.nodes.push(TreeNode::Leaf {
            histogram: histogram.clone(),
        });
        let pure = histogram.iter().filter(|&&c| c > 0.0).count() <= 1;
        if pure
            || rows.len() < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|d| depth >= d)
        {
            return id;
        }
        let Some(split) = self.best_split(&rows, &histogram) else {
            return id;
        };
        if split.gain <= MIN_GAIN {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize], parent: &[f64]) -> Option<Split> {
        let mut order: Vec<usize> = (0..self.x.n_cols()).collect();
        order.shuffle(self.rng);
        let mut examined = 0;
        let mut scored = Vec::new();
        let mut column: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for f in order {
            if examined == self.params.max_features {
                break;
            }
            column.clear();
            column.extend(rows.iter().map(|&i| (self.x.get(i, f), i)));
            column.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if column[0].0 == column[column.len() - 1].0 {
                continue;
            }
            examined += 1;
            scored.extend(self.score_feature(f, &column, parent));
        }
        scored.sort_by_key(|s| s.feature);
        let mut best: Option<Split> = None;
        for s in scored {
            if best.as_ref().is_none_or(|b| s.gain > b.gain) {
                best = Some(s);
            }
        }
        best
    }

    fn score_feature(&self, feature: usize, column: &[(f64, usize)], parent: &[f64]) -> Option<Split> {
        let total: f64 = parent.iter().sum();
        let parent_score = sum_sq_over(parent, total);
        let mut left = vec![0.0; self.n_classes];
        let mut w_left = 0.0;
        let mut best: Option<Split> = None;
        for k in 0..column.len() - 1 {
            let (v, i) = column[k];
            left[self.y[i]] += self.w[i];
            w_left += self.w[i];
            let next = column[k + 1].0;
            if next == v {
                continue;
            }
            let right: Vec<f64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let w_right = total - w_left;
            if w_left <= 0.0 || w_right <= 0.0 {
                continue;
            }
            let gain = (sum_sq_over(&left, w_left) + sum_sq_over(&right, w_right) - parent_score) / total;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some(Split {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
        best
    }
}

fn sum_sq_over(counts: &[f64], total: f64) -> f64 {
    counts.iter().map(|c| c * c).sum::<f64>() / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(m: usize) -> TreeParams {
        TreeParams {
            max_features: m,
            max_depth: None,
            min_samples_split: 2,
        }
    }

    fn fit(x: &[Vec<f64>], y: &[usize], w: &[f64], m: usize) -> DecisionTree {
        let x = Matrix::from_rows(x).unwrap();
        fit_tree(&x, y, w, 2, params(m), &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn separable_data_fits_exactly() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let t = fit(&x, &[0, 0, 1, 1], &[1.0; 4], 1);
        assert_eq!(t.nodes.len(), 3);
        match &t.nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict_proba_row(&[0.4]), vec![1.0, 0.0]);
        assert_eq!(t.predict_proba_row(&[2.9]), vec![0.0, 1.0]);
    }

    #[test]
    fn duplicate_feature_tie_goes_to_lowest_index() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64, i as f64]).collect();
        for seed in 0..20 {
            let m = Matrix::from_rows(&x).unwrap();
            let t = fit_tree(&m, &[0, 0, 0, 1, 1, 1], &[1.0; 6], 2, params(3), &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap();
            assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
        }
    }

    #[test]
    fn equal_gain_thresholds_pick_the_lowest() {
        // Splits at 0.5 and 2.5 both isolate one class-1 row.
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let t = fit(&x, &[1, 0, 0, 1], &[1.0; 4], 1);
        match &t.nodes[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 0.5),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn integer_weights_match_duplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let labels: Vec<usize> = (0..30).map(|i| usize::from(base[i][0] + base[i][1] > 1.0) ^ (i % 7 == 0) as usize).collect();
        let counts: Vec<usize> = (0..30).map(|i| 1 + i % 3).collect();
        let weighted = fit(&base, &labels, &counts.iter().map(|&c| c as f64).collect::<Vec<_>>(), 2);
        let (mut dx, mut dy) = (Vec::new(), Vec::new());
        for i in 0..30 {
            for _ in 0..counts[i] {
                dx.push(base[i].clone());
                dy.push(labels[i]);
            }
        }
        let dup = fit(&dx, &dy, &vec![1.0; dx.len()], 2);
        for r in &base {
            assert_eq!(weighted.predict_proba_row(r), dup.predict_proba_row(r));
        }
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = vec![vec![0.0], vec![1.0], vec![5.0]];
        let t = fit(&x, &[0, 1, 0], &[1.0, 1.0, 0.0], 1);
        assert_eq!(t.predict_proba_row(&[5.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn duplicating_a_point_does_not_lower_its_probability() {
        let x = vec![vec![0.0], vec![1.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = [0, 0, 1, 1, 0];
        let before = fit(&x, &y, &[1.0; 5], 1).predict_proba_row(&[1.0])[1];
        let mut x2 = x.clone();
        x2.push(vec![1.0]);
        let after = fit(&x2, &[0, 0, 1, 1, 0, 1], &[1.0; 6], 1).predict_proba_row(&[1.0])[1];
        assert!(after >= before, "{after} < {before}");
    }

    #[test]
    fn max_depth_limits_growth() {
        let x: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let m = Matrix::from_rows(&x).unwrap();
        let p = TreeParams { max_depth: Some(2), ..params(1) };
        let t = fit_tree(&m, &y, &[1.0; 16], 2, p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(t.depth() <= 2);
    }

    #[test]
    fn rejects_bad_input() {
        let m = Matrix::from_rows(&[vec![0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(fit_tree(&m, &[0], &[0.0], 2, params(1), &mut rng).is_err());
        assert!(fit_tree(&m, &[2], &[1.0], 2, params(1), &mut rng).is_err());
        assert!(fit_tree(&m, &[0], &[-1.0], 2, params(1), &mut rng).is_err());
    }
}
