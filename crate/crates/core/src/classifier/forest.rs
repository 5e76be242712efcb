use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, DecisionTree, TreeParams};
use super::{ClassifierFactory, ProbabilisticClassifier};
use crate::dataset::{compare_rows, Matrix};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    #[default]
    Gini,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(c) => c,
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub criterion: SplitCriterion,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 50,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_samples_split: 2,
            bootstrap: true,
            criterion: SplitCriterion::Gini,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter("min_samples_split must be >= 2".into()));
        }
        if matches!(self.max_features, MaxFeatures::Count(0)) {
            return Err(Error::InvalidParameter("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub format_version: u32,
    pub config: ForestConfig,
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl ProbabilisticClassifier for RandomForest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.predict_proba_row(row)) {
                *acc += v;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }
}

impl RandomForest {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let model: RandomForest = serde_json::from_reader(f)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch(format!(
                "model format {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Fits a bagged forest. Rows are first put into a content-defined order so
/// that the model does not depend on the order rows were supplied in; tree
/// `t` draws from its own ChaCha stream of `config.seed`.
pub fn fit_forest(
    x: &Matrix,
    y: &[usize],
    weights: &[f64],
    n_classes: usize,
    config: &ForestConfig,
) -> Result<RandomForest> {
    config.validate()?;
    if y.len() != x.n_rows() || weights.len() != x.n_rows() {
        return Err(Error::InvalidParameter("x, y and weights differ in length".into()));
    }
    if x.n_rows() == 0 {
        return Err(Error::Empty("cannot fit a forest on zero rows".into()));
    }
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    order.sort_by(|&a, &b| compare_rows(x, a, b).then(y[a].cmp(&y[b])).then(weights[a].total_cmp(&weights[b])));
    let xs = x.select_rows(&order);
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let ws: Vec<f64> = order.iter().map(|&i| weights[i]).collect();

    let params = TreeParams {
        max_features: config.max_features.resolve(x.n_cols()),
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
    };
    let n = xs.n_rows();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let w: Vec<f64> = if config.bootstrap {
                let mut mult = vec![0u32; n];
                for _ in 0..n {
                    mult[rng.gen_range(0..n)] += 1;
                }
                mult.iter().zip(&ws).map(|(&m, &w)| m as f64 * w).collect()
            } else {
                ws.clone()
            };
            if !w.iter().any(|&v| v > 0.0) {
                // A bootstrap that only drew zero-weight rows: fall back to the full sample.
                return fit_tree(&xs, &ys, &ws, n_classes, params, &mut rng);
            }
            fit_tree(&xs, &ys, &w, n_classes, params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest {
        format_version: MODEL_FORMAT_VERSION,
        config: config.clone(),
        n_classes,
        n_features: x.n_cols(),
        trees,
    })
}

/// [`ClassifierFactory`] for random forests with a fixed configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForestFactory {
    pub config: ForestConfig,
}

impl ForestFactory {
    pub fn new(config: ForestConfig) -> Self {
        ForestFactory { config }
    }
}

impl ClassifierFactory for ForestFactory {
    type Model = RandomForest;

    fn fit(&self, x: &Matrix, y: &[usize], weights: &[f64], n_classes: usize) -> Result<RandomForest> {
        fit_forest(x, y, weights, n_classes, &self.config)
    }
}
