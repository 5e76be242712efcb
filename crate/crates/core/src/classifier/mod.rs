//! Probabilistic classifiers: a weighted CART tree and a bagged random
//! forest built from it.

mod forest;
mod tree;

pub use forest::{
    fit_forest, ForestConfig, ForestFactory, MaxFeatures, RandomForest, SplitCriterion, MODEL_FORMAT_VERSION,
};
pub use tree::{fit_tree, DecisionTree, TreeNode, TreeParams};

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::dataset::Matrix;
use crate::error::{Error, Result};

/// A fitted model that returns one probability per class.
pub trait ProbabilisticClassifier: Send + Sync {
    fn n_classes(&self) -> usize;

    /// Class probabilities for one feature row; sums to 1.
    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64>;

    fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.n_rows())
            .into_par_iter()
            .map(|i| self.predict_proba_row(x.row(i)))
            .collect()
    }
}

/// Something that can fit a [`ProbabilisticClassifier`] from weighted rows.
pub trait ClassifierFactory: Send + Sync {
    type Model: ProbabilisticClassifier + Clone;

    fn fit(&self, x: &Matrix, y: &[usize], weights: &[f64], n_classes: usize) -> Result<Self::Model>;
}

/// Wraps a factory and counts how many models it has fitted.
#[derive(Debug, Default)]
pub struct CountingFactory<F> {
    pub inner: F,
    fits: AtomicUsize,
}

impl<F> CountingFactory<F> {
    pub fn new(inner: F) -> Self {
        CountingFactory {
            inner,
            fits: AtomicUsize::new(0),
        }
    }

    pub fn fits(&self) -> usize {
        self.fits.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.fits.store(0, Ordering::SeqCst);
    }
}

impl<F: ClassifierFactory> ClassifierFactory for CountingFactory<F> {
    type Model = F::Model;

    fn fit(&self, x: &Matrix, y: &[usize], weights: &[f64], n_classes: usize) -> Result<F::Model> {
        self.fits.fetch_add(1, Ordering::SeqCst);
        self.inner.fit(x, y, weights, n_classes)
    }
}

/// `1 - Σ (c_k / n)²` over (possibly weighted) class counts.
pub fn gini_impurity(counts: &[f64]) -> Result<f64> {
    if counts.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::InvalidParameter("class counts must be >= 0".into()));
    }
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("gini impurity of an empty node".into()));
    }
    Ok(1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>())
}

/// Per-class weights inversely proportional to class frequency:
/// `n_total / (K_present * n_k)`. Absent classes get weight 0.
pub fn class_weights(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let n = labels.len() as f64;
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0.0
            } else {
                n / (present as f64 * c as f64)
            }
        })
        .collect()
}

/// Row weights derived from [`class_weights`].
pub fn balanced_sample_weights(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let w = class_weights(labels, n_classes);
    labels.iter().map(|&y| w[y]).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini_impurity(&[10.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[5.0, 5.0]).unwrap(), 0.5);
        assert!((gini_impurity(&[1.0, 2.0, 3.0]).unwrap() - 11.0 / 18.0).abs() < 1e-15);
        assert!(gini_impurity(&[0.0, 0.0]).is_err());
        assert!(gini_impurity(&[]).is_err());
    }

    #[test]
    fn class_weight_formula() {
        assert_eq!(class_weights(&[0, 1, 0, 1], 2), vec![1.0, 1.0]);
        let labels: Vec<usize> = std::iter::repeat_n(0, 90).chain(std::iter::repeat_n(1, 10)).collect();
        let w = class_weights(&labels, 2);
        assert!((w[0] - 100.0 / 180.0).abs() < 1e-15);
        assert!((w[1] - 5.0).abs() < 1e-15);
        let sw = balanced_sample_weights(&labels, 2);
        let mean = sw.iter().sum::<f64>() / sw.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        assert_eq!(class_weights(&[2, 2], 3), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.9, 0.1]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
    }
}
