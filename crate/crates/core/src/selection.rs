//! Greedy backward elimination and top-k subset sweeps.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, ClassifierFactory, ProbabilisticClassifier};
use crate::dataset::LabeledData;
use crate::evaluation::{cross_validate, macro_f1, Configuration, ConfusionMatrix, Split};
use crate::error::{Error, Result};

/// Features ordered from most (rank 1) to least useful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub names: Vec<String>,
    /// `scores[r]` is the validation macro-F1 of the feature set that
    /// remained when `names[r]` was eliminated; rank 1 repeats the final step.
    pub scores: Vec<f64>,
    pub models_trained: usize,
}

impl FeatureRanking {
    pub fn top(&self, m: usize) -> &[String] {
        &self.names[..m.min(self.names.len())]
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Trains a multiclass model on `split.train` restricted to `cols` and
/// returns its macro-F1 on `split.test`.
fn holdout_score<F: ClassifierFactory>(data: &LabeledData, split: &Split, cols: &[usize], factory: &F) -> Result<f64> {
    let train = data.subset_rows(&split.train).subset_cols(cols);
    let test = data.subset_rows(&split.test).subset_cols(cols);
    let model = factory.fit(&train.x, &train.y, &vec![1.0; train.len()], data.n_classes)?;
    let pred: Vec<usize> = model.predict_proba(&test.x).iter().map(|p| argmax(p)).collect();
    macro_f1(&ConfusionMatrix::from_predictions(&test.y, &pred, data.n_classes)?)
}

/// Removes one feature per step, always the one whose absence gives the
/// best hold-out macro-F1 (the higher column index on ties), until one
/// feature is left. Ranking is the reverse elimination order.
pub fn backward_eliminate<F: ClassifierFactory>(data: &LabeledData, factory: &F, split: &Split) -> Result<FeatureRanking> {
    let n = data.n_features();
    if n < 2 {
        return Err(Error::InvalidParameter("backward elimination needs at least 2 features".into()));
    }
    if split.test.is_empty() || split.train.is_empty() {
        return Err(Error::Empty("backward elimination needs non-empty train and test rows".into()));
    }
    let mut current: Vec<usize> = (0..n).collect();
    let mut removed: Vec<(usize, f64)> = Vec::with_capacity(n - 1);
    let mut models = 0;
    while current.len() > 1 {
        let candidates: Vec<(usize, Vec<usize>)> = current
            .iter()
            .map(|&f| (f, current.iter().copied().filter(|&c| c != f).collect()))
            .collect();
        let scores = candidates
            .par_iter()
            .map(|(_, cols)| holdout_score(data, split, cols, factory))
            .collect::<Result<Vec<f64>>>()?;
        models += candidates.len();
        for ((_, cols), s) in candidates.iter().zip(&scores) {
            if !s.is_finite() {
                return Err(Error::NonFiniteScore(cols.iter().map(|&c| data.feature_names[c].clone()).collect()));
            }
        }
        let mut best = 0;
        for i in 1..candidates.len() {
            let better = scores[i] > scores[best] || (scores[i] == scores[best] && candidates[i].0 > candidates[best].0);
            if better {
                best = i;
            }
        }
        let drop = candidates[best].0;
        log::debug!(
            "eliminated {} ({} left, macro-F1 {:.4})",
            data.feature_names[drop],
            current.len() - 1,
            scores[best]
        );
        removed.push((drop, scores[best]));
        current.retain(|&c| c != drop);
    }
    let last_score = removed.last().map(|r| r.1).unwrap_or(f64::NAN);
    let mut names = vec![data.feature_names[current[0]].clone()];
    let mut scores = vec![last_score];
    for &(f, s) in removed.iter().rev() {
        names.push(data.feature_names[f].clone());
        scores.push(s);
    }
    Ok(FeatureRanking {
        names,
        scores,
        models_trained: models,
    })
}

/// Subset sizes of the coarse pass: `start, start + step, ...` and `n`.
pub fn coarse_sizes(n: usize, start: usize, step: usize) -> Vec<usize> {
    let start = start.min(n).max(1);
    let mut sizes: Vec<usize> = (start..=n).step_by(step.max(1)).collect();
    if sizes.last() != Some(&n) {
        sizes.push(n);
    }
    sizes
}

/// Sizes of the fine pass around `center`: every `fine_step` within
/// `coarse_step - 1` of it, clamped to `1..=n`.
pub fn fine_sizes(center: usize, n: usize, coarse_step: usize, fine_step: usize) -> Vec<usize> {
    let reach = coarse_step.saturating_sub(1);
    let lo = center.saturating_sub(reach).max(1);
    let hi = (center + reach).min(n);
    (lo..=hi).step_by(fine_step.max(1)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeScore {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scores: BTreeMap<usize, SizeScore>,
    pub best_size: usize,
    pub best_score: f64,
    pub best: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub start: usize,
    pub coarse_step: usize,
    pub fine_step: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            start: 10,
            coarse_step: 5,
            fine_step: 1,
            folds: 10,
            seed: 0,
        }
    }
}

/// Scores the top-`m` ranked features by grouped cross-validation for a
/// coarse grid of `m`, then for a fine window around the coarse optimum.
/// The best mean macro-F1 wins; ties go to the smaller subset.
pub fn subset_sweep<F: ClassifierFactory>(
    ranking: &FeatureRanking,
    data: &LabeledData,
    config: &Configuration,
    factory: &F,
    params: &SweepParams,
) -> Result<SweepResult> {
    let index: Vec<usize> = ranking
        .names
        .iter()
        .map(|name| {
            data.feature_names
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| Error::InvalidParameter(format!("ranked feature {name:?} not in data")))
        })
        .collect::<Result<_>>()?;
    let n = index.len();
    let mut scores: BTreeMap<usize, SizeScore> = BTreeMap::new();
    let evaluate = |sizes: Vec<usize>, scores: &mut BTreeMap<usize, SizeScore>| -> Result<()> {
        for m in sizes {
            if scores.contains_key(&m) {
                continue;
            }
            let sub = data.subset_cols(&index[..m]);
            let r = cross_validate(&sub, std::slice::from_ref(config), factory, params.folds, params.seed)?;
            scores.insert(
                m,
                SizeScore {
                    mean: r[0].summary.macro_f1_mean,
                    std: r[0].summary.macro_f1_std,
                },
            );
        }
        Ok(())
    };
    let best_of = |scores: &BTreeMap<usize, SizeScore>| {
        scores
            .iter()
            .fold(None::<(usize, f64)>, |b, (&m, s)| match b {
                Some((_, bs)) if bs >= s.mean => b,
                _ => Some((m, s.mean)),
            })
            .expect("at least one size scored")
    };
    evaluate(coarse_sizes(n, params.start, params.coarse_step), &mut scores)?;
    let (coarse_best, _) = best_of(&scores);
    evaluate(fine_sizes(coarse_best, n, params.coarse_step, params.fine_step), &mut scores)?;
    let (best_size, best_score) = best_of(&scores);
    Ok(SweepResult {
        best: ranking.names[..best_size].to_vec(),
        scores,
        best_size,
        best_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{CountingFactory, ForestConfig, ForestFactory};
    use crate::dataset::Matrix;
    use crate::ensemble::CouplingMethod;
    use crate::evaluation::grouped_holdout;
    use crate::imbalance::ResampleSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn informative_plus_constant(seed: u64) -> LabeledData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Matrix::with_cols(3);
        let (mut y, mut g) = (Vec::new(), Vec::new());
        for i in 0..120 {
            let c = i % 3;
            let a = if c == 1 { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3);
            let b = if c == 2 { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3);
            x.push_row(&[a, 4.2, b]).unwrap();
            y.push(c);
            g.push(i as i64);
        }
        LabeledData::new(x, y, g, 3, vec!["a".into(), "const".into(), "b".into()]).unwrap()
    }

    fn forest() -> ForestFactory {
        ForestFactory::new(ForestConfig {
            n_trees: 10,
            ..ForestConfig::default()
        })
    }

    #[test]
    fn constant_feature_goes_first() {
        let data = informative_plus_constant(1);
        let split = grouped_holdout(&data, 0).unwrap();
        let counting = CountingFactory::new(forest());
        let r = backward_eliminate(&data, &counting, &split).unwrap();
        assert_eq!(r.names.len(), 3);
        assert_eq!(r.names[2], "const");
        assert_eq!(r.scores.len(), 3);
        assert_eq!(r.models_trained, 3 * 4 / 2 - 1);
        assert_eq!(counting.fits(), r.models_trained);
    }

    #[test]
    fn two_features_take_one_step() {
        let data = informative_plus_constant(2).subset_cols(&[0, 2]);
        let split = grouped_holdout(&data, 0).unwrap();
        let r = backward_eliminate(&data, &forest(), &split).unwrap();
        assert_eq!(r.models_trained, 2);
        assert_eq!(r.scores[0], r.scores[1]);
    }

    #[test]
    fn single_feature_is_rejected() {
        let data = informative_plus_constant(2).subset_cols(&[0]);
        let split = grouped_holdout(&data, 0).unwrap();
        assert!(backward_eliminate(&data, &forest(), &split).is_err());
    }

    #[test]
    fn sweep_windows() {
        assert_eq!(coarse_sizes(50, 10, 5), vec![10, 15, 20, 25, 30, 35, 40, 45, 50]);
        assert_eq!(coarse_sizes(22, 10, 5), vec![10, 15, 20, 22]);
        assert_eq!(coarse_sizes(4, 10, 5), vec![4]);
        assert_eq!(fine_sizes(20, 50, 5, 1), (16..=24).collect::<Vec<_>>());
        assert_eq!(fine_sizes(50, 50, 5, 1), (46..=50).collect::<Vec<_>>());
        assert_eq!(fine_sizes(2, 50, 5, 1), (1..=6).collect::<Vec<_>>());
    }

    #[test]
    fn sweep_is_reproducible() {
        let data = informative_plus_constant(3);
        let ranking = FeatureRanking {
            names: vec!["a".into(), "b".into(), "const".into()],
            scores: vec![1.0; 3],
            models_trained: 0,
        };
        let cfg = Configuration::new(CouplingMethod::Multiclass, ResampleSpec::default());
        let params = SweepParams {
            start: 1,
            coarse_step: 1,
            folds: 4,
            ..SweepParams::default()
        };
        let a = subset_sweep(&ranking, &data, &cfg, &forest(), &params).unwrap();
        let b = subset_sweep(&ranking, &data, &cfg, &forest(), &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scores.len(), 3);
        assert!(a.best_size >= 2, "both informative features are needed");
    }
}
