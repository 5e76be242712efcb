//! Grouped cross-validation, nested model selection and scoring.
//!
//! Folds are built over cluster ids so that windows of one cluster never
//! end up on both sides of a split. Augmented rows follow their cluster
//! into training folds and are never scored.

pub mod report;

pub use report::{confusion_delta, render_json, render_text};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierFactory;
use crate::dataset::LabeledData;
use crate::ensemble::{train_families, CouplingMethod, Families};
use crate::error::{Error, Result};
use crate::imbalance::ResampleSpec;

/// Counts indexed `[truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_predictions(truth: &[usize], pred: &[usize], k: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::InvalidParameter("truth and predictions differ in length".into()));
        }
        let mut m = ConfusionMatrix::new(k);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= k || p >= k {
                return Err(Error::InvalidParameter(format!("class index out of range for K = {k}")));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Precision, recall and F1 per class; 0 wherever a denominator is 0.
    pub fn per_class(&self) -> Vec<ClassMetrics> {
        let k = self.k();
        (0..k)
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let support: u64 = self.counts[c].iter().sum();
                let predicted: u64 = (0..k).map(|t| self.counts[t][c]).sum();
                let ratio = |n: f64, d: u64| if d == 0 { 0.0 } else { n / d as f64 };
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect()
    }

    pub fn recall(&self, class: usize) -> f64 {
        self.per_class()[class].recall
    }
}

/// Mean F1 over the classes that occur in the truth labels.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::Empty("confusion matrix has no samples".into()));
    }
    let metrics = cm.per_class();
    let present: Vec<&ClassMetrics> = metrics.iter().filter(|m| m.support > 0).collect();
    if present.len() < cm.k() {
        log::debug!("{} classes absent from truth, left out of the macro average", cm.k() - present.len());
    }
    Ok(present.iter().map(|m| m.f1).sum::<f64>() / present.len() as f64)
}

/// Mean and sample standard deviation; the deviation of fewer than two
/// values is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Assigns every sample a fold in `0..k` such that all samples of a group
/// share a fold. Groups are shuffled by `seed`, ordered largest first and
/// each placed in the currently smallest fold.
pub fn grouped_kfold(groups: &[i64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be >= 2".into()));
    }
    let mut sizes: BTreeMap<i64, usize> = BTreeMap::new();
    for &g in groups {
        *sizes.entry(g).or_default() += 1;
    }
    if sizes.len() < k {
        return Err(Error::NotEnoughGroups {
            groups: sizes.len(),
            folds: k,
        });
    }
    let mut order: Vec<(i64, usize)> = sizes.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|e| std::cmp::Reverse(e.1));
    let mut load = vec![0usize; k];
    let mut fold_of: BTreeMap<i64, usize> = BTreeMap::new();
    for (g, size) in order {
        let f = (0..k).min_by_key(|&f| (load[f], f)).expect("k >= 2");
        load[f] += size;
        fold_of.insert(g, f);
    }
    Ok(groups.iter().map(|g| fold_of[g]).collect())
}

/// Train and test indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Grouped k-fold over the original rows of `data`. Augmented rows join the
/// training side of their group's fold.
pub fn grouped_splits(data: &LabeledData, k: usize, seed: u64) -> Result<Vec<Split>> {
    let originals = data.original_rows();
    let og: Vec<i64> = originals.iter().map(|&i| data.groups[i]).collect();
    let folds = grouped_kfold(&og, k, seed)?;
    let fold_of: BTreeMap<i64, usize> = og.iter().copied().zip(folds.iter().copied()).collect();
    Ok((0..k)
        .map(|f| {
            let test = originals
                .iter()
                .zip(&folds)
                .filter(|(_, &ff)| ff == f)
                .map(|(&i, _)| i)
                .collect();
            let train = (0..data.len())
                .filter(|&i| fold_of.get(&data.groups[i]) != Some(&f))
                .collect();
            Split { train, test }
        })
        .collect())
}

/// The 80/20 grouped hold-out: fold 0 of a grouped 5-fold split.
pub fn grouped_holdout(data: &LabeledData, seed: u64) -> Result<Split> {
    Ok(grouped_splits(data, 5, seed)?.swap_remove(0))
}

/// One point of the method/resampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Configuration {
    pub method: CouplingMethod,
    #[serde(default)]
    pub resample: ResampleSpec,
    #[serde(default)]
    pub two_stage_thr: Option<f64>,
}

impl Configuration {
    pub fn new(method: CouplingMethod, resample: ResampleSpec) -> Self {
        Configuration {
            method,
            resample,
            two_stage_thr: None,
        }
    }

    /// Display name, e.g. `pwc-ova2/smote_tomek` or `pwc-ova/none@thr=0.75`.
    pub fn name(&self) -> String {
        let mut s = format!("{}/{}", self.method, self.resample.label());
        if let Some(t) = self.two_stage_thr {
            s.push_str(&format!("@thr={t}"));
        }
        s
    }

    fn families(&self) -> Families {
        let mut f = self.method.families();
        if self.two_stage_thr.is_some() {
            f.pairwise = true;
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub name: String,
    pub method: CouplingMethod,
    pub resample: ResampleSpec,
    pub two_stage_thr: Option<f64>,
    pub features: Vec<String>,
    pub seed: u64,
    pub n_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
    /// Sum of the per-fold confusion matrices.
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ReportConfig,
    pub folds: Vec<FoldResult>,
    pub summary: Summary,
}

impl EvaluationReport {
    pub fn from_folds(config: ReportConfig, folds: Vec<FoldResult>) -> Result<Self> {
        let first = folds
            .first()
            .ok_or_else(|| Error::Empty("a report needs at least one fold".into()))?;
        let mut confusion = ConfusionMatrix::new(first.confusion.k());
        for f in &folds {
            confusion.add(&f.confusion);
        }
        let scores: Vec<f64> = folds.iter().map(|f| f.macro_f1).collect();
        let (macro_f1_mean, macro_f1_std) = mean_std(&scores);
        Ok(EvaluationReport {
            config,
            summary: Summary {
                macro_f1_mean,
                macro_f1_std,
                per_class: confusion.per_class(),
                confusion,
            },
            folds,
        })
    }
}

/// Confusion matrix of every configuration after training on `train` and
/// testing on `test`. Models are fitted once per distinct resampling spec
/// and shared by every coupler that uses it.
pub fn evaluate_split<F: ClassifierFactory>(
    data: &LabeledData,
    split: &Split,
    configs: &[Configuration],
    factory: &F,
) -> Result<Vec<ConfusionMatrix>> {
    let train = data.subset_rows(&split.train);
    let test = data.subset_rows(&split.test);
    let mut out: Vec<Option<ConfusionMatrix>> = vec![None; configs.len()];
    let mut specs: Vec<&ResampleSpec> = Vec::new();
    for c in configs {
        if !specs.contains(&&c.resample) {
            specs.push(&c.resample);
        }
    }
    for spec in specs {
        let members: Vec<usize> = (0..configs.len()).filter(|&i| &configs[i].resample == spec).collect();
        let families = members
            .iter()
            .fold(Families::default(), |acc, &i| acc.union(configs[i].families()));
        let models = train_families(&train.x, &train.y, data.n_classes, families, factory, spec)?;
        for i in members {
            let c = &configs[i];
            let decided = models.decide(&test.x, c.method, c.two_stage_thr)?;
            let pred: Vec<usize> = decided.into_iter().map(|d| d.decision).collect();
            out[i] = Some(ConfusionMatrix::from_predictions(&test.y, &pred, data.n_classes)?);
        }
    }
    Ok(out.into_iter().map(|c| c.expect("every configuration evaluated")).collect())
}

fn report_config(c: &Configuration, data: &LabeledData, seed: u64, n_folds: usize) -> ReportConfig {
    ReportConfig {
        name: c.name(),
        method: c.method,
        resample: c.resample.clone(),
        two_stage_thr: c.two_stage_thr,
        features: data.feature_names.clone(),
        seed,
        n_folds,
    }
}

/// Grouped k-fold cross-validation of every configuration.
pub fn cross_validate<F: ClassifierFactory>(
    data: &LabeledData,
    configs: &[Configuration],
    factory: &F,
    k: usize,
    seed: u64,
) -> Result<Vec<EvaluationReport>> {
    if configs.is_empty() {
        return Err(Error::Empty("no configurations to evaluate".into()));
    }
    let splits = grouped_splits(data, k, seed)?;
    let per_fold: Vec<Vec<ConfusionMatrix>> = splits
        .par_iter()
        .map(|s| evaluate_split(data, s, configs, factory))
        .collect::<Result<_>>()?;
    configs
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let folds = per_fold
                .iter()
                .enumerate()
                .map(|(f, cms)| {
                    Ok(FoldResult {
                        fold: f,
                        macro_f1: macro_f1(&cms[ci])?,
                        confusion: cms[ci].clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            EvaluationReport::from_folds(report_config(c, data, seed, k), folds)
        })
        .collect()
}

/// Choice made in one outer fold of [`nested_cv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFold {
    pub fold: usize,
    pub selected: String,
    /// Inner-CV mean macro-F1 of every configuration, in grid order.
    pub inner_scores: Vec<f64>,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedCvReport {
    pub outer: Vec<OuterFold>,
    /// Outer-fold scores of the configuration chosen in each fold.
    pub selected: EvaluationReport,
    /// Outer-fold scores of every configuration, in grid order.
    pub per_config: Vec<EvaluationReport>,
}

/// Nested grouped cross-validation. In every outer fold an inner k-fold on
/// the outer training rows picks the configuration with the best mean
/// macro-F1 (earliest in the grid on ties); the outer test rows are only
/// used for scoring.
pub fn nested_cv<F: ClassifierFactory>(
    data: &LabeledData,
    grid: &[Configuration],
    factory: &F,
    k_outer: usize,
    k_inner: usize,
    seed: u64,
) -> Result<NestedCvReport> {
    if grid.is_empty() {
        return Err(Error::Empty("empty configuration grid".into()));
    }
    let outer = grouped_splits(data, k_outer, seed)?;
    let results: Vec<(Vec<f64>, Vec<ConfusionMatrix>)> = outer
        .par_iter()
        .enumerate()
        .map(|(f, split)| {
            let inner_data = data.subset_rows(&split.train);
            let inner_seed = seed.wrapping_add(1 + f as u64);
            let inner = cross_validate(&inner_data, grid, factory, k_inner, inner_seed)?;
            let scores = inner.iter().map(|r| r.summary.macro_f1_mean).collect();
            let outer_cms = evaluate_split(data, split, grid, factory)?;
            Ok((scores, outer_cms))
        })
        .collect::<Result<_>>()?;

    let mut outer_folds = Vec::new();
    let mut selected_folds = Vec::new();
    for (f, (scores, cms)) in results.iter().enumerate() {
        let best = (0..grid.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        let score = macro_f1(&cms[best])?;
        outer_folds.push(OuterFold {
            fold: f,
            selected: grid[best].name(),
            inner_scores: scores.clone(),
            macro_f1: score,
        });
        selected_folds.push(FoldResult {
            fold: f,
            macro_f1: score,
            confusion: cms[best].clone(),
        });
    }
    let per_config = grid
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let folds = results
                .iter()
                .enumerate()
                .map(|(f, (_, cms))| {
                    Ok(FoldResult {
                        fold: f,
                        macro_f1: macro_f1(&cms[ci])?,
                        confusion: cms[ci].clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            EvaluationReport::from_folds(report_config(c, data, seed, k_outer), folds)
        })
        .collect::<Result<Vec<_>>>()?;
    let selected_config = ReportConfig {
        name: "nested-selection".into(),
        ..report_config(&grid[0], data, seed, k_outer)
    };
    Ok(NestedCvReport {
        outer: outer_folds,
        selected: EvaluationReport::from_folds(selected_config, selected_folds)?,
        per_config,
    })
}
