//! Multiclass binarization and probability coupling.
//!
//! Pairwise models are trained once per unordered class pair `i < j` with
//! class `i` as the positive label, so `p(j, i) = 1 - p(i, j)` holds by
//! construction. One-vs-all models use the single class as positive.
//! Every argmax breaks ties towards the lowest class index.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, ClassifierFactory, ProbabilisticClassifier};
use crate::data_model::ClassLabel;
use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::imbalance::ResampleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMethod {
    Multiclass,
    Ova,
    Pwc1,
    Pwc2,
    Pwc3,
    Pwc4,
    Pwc5,
    #[serde(alias = "pwc-ova")]
    PwcOva,
    #[serde(alias = "pwc-ova2")]
    PwcOva2,
}

impl CouplingMethod {
    pub const ALL: [CouplingMethod; 9] = [
        CouplingMethod::Multiclass,
        CouplingMethod::Ova,
        CouplingMethod::Pwc1,
        CouplingMethod::Pwc2,
        CouplingMethod::Pwc3,
        CouplingMethod::Pwc4,
        CouplingMethod::Pwc5,
        CouplingMethod::PwcOva,
        CouplingMethod::PwcOva2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CouplingMethod::Multiclass => "multiclass",
            CouplingMethod::Ova => "ova",
            CouplingMethod::Pwc1 => "pwc1",
            CouplingMethod::Pwc2 => "pwc2",
            CouplingMethod::Pwc3 => "pwc3",
            CouplingMethod::Pwc4 => "pwc4",
            CouplingMethod::Pwc5 => "pwc5",
            CouplingMethod::PwcOva => "pwc-ova",
            CouplingMethod::PwcOva2 => "pwc-ova2",
        }
    }

    pub fn families(self) -> Families {
        use CouplingMethod::*;
        Families {
            multiclass: self == Multiclass,
            pairwise: !matches!(self, Multiclass | Ova),
            ova: matches!(self, Ova | PwcOva | PwcOva2),
        }
    }

    fn delta_variant(self) -> Option<DeltaVariant> {
        match self {
            CouplingMethod::Pwc1 => Some(DeltaVariant::Pwc1),
            CouplingMethod::Pwc2 => Some(DeltaVariant::Pwc2),
            CouplingMethod::Pwc3 => Some(DeltaVariant::Pwc3),
            CouplingMethod::Pwc4 => Some(DeltaVariant::Pwc4),
            CouplingMethod::Pwc5 => Some(DeltaVariant::Pwc5),
            _ => None,
        }
    }
}

impl fmt::Display for CouplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CouplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '-'], "");
        CouplingMethod::ALL
            .into_iter()
            .find(|m| m.name().replace('-', "") == norm)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown coupling method `{s}`")))
    }
}

/// Which model families a set of coupling methods needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Families {
    pub multiclass: bool,
    pub pairwise: bool,
    pub ova: bool,
}

impl Families {
    pub fn for_methods(methods: &[CouplingMethod]) -> Families {
        methods.iter().fold(Families::default(), |acc, m| acc.union(m.families()))
    }

    pub fn union(self, other: Families) -> Families {
        Families {
            multiclass: self.multiclass || other.multiclass,
            pairwise: self.pairwise || other.pairwise,
            ova: self.ova || other.ova,
        }
    }

    /// Number of models these families hold for `k` classes.
    pub fn model_count(self, k: usize) -> usize {
        usize::from(self.multiclass) + if self.pairwise { k * (k - 1) / 2 } else { 0 } + if self.ova { k } else { 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaVariant {
    Pwc1,
    Pwc2,
    Pwc3,
    Pwc4,
    Pwc5,
}

/// Unit step with `step(0) = 1`.
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Vote weight a pairwise probability contributes to its class.
pub fn delta(p: f64, variant: DeltaVariant) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
    }
    Ok(delta_unchecked(p, variant))
}

fn delta_unchecked(p: f64, variant: DeltaVariant) -> f64 {
    match variant {
        DeltaVariant::Pwc1 => heaviside(p - 0.5),
        DeltaVariant::Pwc2 => p,
        DeltaVariant::Pwc3 => 1.0 / (1.0 + (-12.0 * (p - 0.5)).exp()),
        DeltaVariant::Pwc4 => p * heaviside(0.5 - p) + heaviside(p - 0.5),
        DeltaVariant::Pwc5 => p * heaviside(p - 0.5),
    }
}

/// Pairwise probabilities `p(i, j)` for `i < j` and optional one-vs-all
/// probabilities for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    k: usize,
    pairwise: Vec<f64>,
    ova: Option<Vec<f64>>,
}

/// Position of pair `(i, j)`, `i < j`, in row-major upper-triangle order.
pub fn pair_index(k: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * (2 * k - i - 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)` with `i < j < k` in [`pair_index`] order.
pub fn pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
}

impl ProbabilityTable {
    pub fn new(k: usize, pairwise: Vec<f64>, ova: Option<Vec<f64>>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter("a probability table needs K >= 2".into()));
        }
        if pairwise.len() != k * (k - 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "{} pairwise entries for K = {k}",
                pairwise.len()
            )));
        }
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !pairwise.iter().all(in_unit) {
            return Err(Error::InvalidParameter("pairwise probability outside [0, 1]".into()));
        }
        if let Some(o) = &ova {
            if o.len() != k || !o.iter().all(in_unit) {
                return Err(Error::InvalidParameter("ova entries must be K values in [0, 1]".into()));
            }
        }
        Ok(ProbabilityTable { k, pairwise, ova })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `p(i, j)` for any `i != j`.
    pub fn p(&self, i: usize, j: usize) -> f64 {
        assert!(i != j, "p(i, i) is undefined");
        if i < j {
            self.pairwise[pair_index(self.k, i, j)]
        } else {
            1.0 - self.pairwise[pair_index(self.k, j, i)]
        }
    }

    pub fn ova(&self) -> Option<&[f64]> {
        self.ova.as_deref()
    }

    fn require_ova(&self) -> Result<&[f64]> {
        self.ova()
            .ok_or_else(|| Error::InvalidParameter("coupling method needs one-vs-all probabilities".into()))
    }
}

/// Per-class scores and the chosen class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupled {
    pub scores: Vec<f64>,
    pub decision: usize,
}

impl Coupled {
    fn from_scores(scores: Vec<f64>) -> Self {
        let decision = argmax(&scores);
        Coupled { scores, decision }
    }
}

fn delta_sums(table: &ProbabilityTable, variant: DeltaVariant) -> Vec<f64> {
    let k = table.k;
    (0..k)
        .map(|i| (0..k).filter(|&j| j != i).map(|j| delta_unchecked(table.p(i, j), variant)).sum())
        .collect()
}

/// Pairwise coupling `score_i = Σ_{j≠i} δ(p(i, j))`.
///
/// With [`DeltaVariant::Pwc1`] a tie for the most votes is settled by the
/// PWC-2 sums of the tied classes; their scores are replaced by those sums
/// and the decision is made among them alone.
pub fn couple_pwc(table: &ProbabilityTable, variant: DeltaVariant) -> Coupled {
    let mut scores = delta_sums(table, variant);
    if variant != DeltaVariant::Pwc1 {
        return Coupled::from_scores(scores);
    }
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..table.k).filter(|&i| scores[i] == top).collect();
    if tied.len() == 1 {
        return Coupled::from_scores(scores);
    }
    let soft = delta_sums(table, DeltaVariant::Pwc2);
    let mut decision = tied[0];
    for &i in &tied {
        scores[i] = soft[i];
        if soft[i] > soft[decision] {
            decision = i;
        }
    }
    Coupled { scores, decision }
}

pub fn couple_ova(table: &ProbabilityTable) -> Result<Coupled> {
    Ok(Coupled::from_scores(table.require_ova()?.to_vec()))
}

/// `score_i = Σ_{j≠i} p(i, j) · (ova_i + ova_j)`.
pub fn couple_pwc_ova(table: &ProbabilityTable) -> Result<Coupled> {
    let ova = table.require_ova()?;
    let k = table.k;
    let scores = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| table.p(i, j) * (ova[i] + ova[j]))
                .sum()
        })
        .collect();
    Ok(Coupled::from_scores(scores))
}

/// `score_i = ova_i · Σ_{j≠i} p(i, j)`.
pub fn couple_pwc_ova2(table: &ProbabilityTable) -> Result<Coupled> {
    let ova = table.require_ova()?;
    let sums = delta_sums(table, DeltaVariant::Pwc2);
    Ok(Coupled::from_scores(sums.iter().zip(ova).map(|(s, o)| o * s).collect()))
}

/// Any coupler except [`CouplingMethod::Multiclass`], which has no table.
pub fn couple(table: &ProbabilityTable, method: CouplingMethod) -> Result<Coupled> {
    match method {
        CouplingMethod::Multiclass => Err(Error::InvalidParameter(
            "the multiclass method is not a coupling of a probability table".into(),
        )),
        CouplingMethod::Ova => couple_ova(table),
        CouplingMethod::PwcOva => couple_pwc_ova(table),
        CouplingMethod::PwcOva2 => couple_pwc_ova2(table),
        m => Ok(couple_pwc(table, m.delta_variant().expect("pwc variant"))),
    }
}

pub const CAR: usize = 0;
pub const TRUCK_BUS: usize = 4;

/// Second stage: a car decision becomes truck/bus when the pairwise
/// truck-vs-car probability exceeds `thr`.
pub fn two_stage_truck(decision: usize, table: &ProbabilityTable, thr: f64) -> usize {
    if decision == CAR && table.p(TRUCK_BUS, CAR) > thr {
        TRUCK_BUS
    } else {
        decision
    }
}

/// Fitted models of every family a set of methods needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModels<M> {
    pub n_classes: usize,
    pub multiclass: Option<M>,
    /// One model per pair in [`pairs`] order.
    pub pairwise: Option<Vec<M>>,
    pub ova: Option<Vec<M>>,
}

enum Problem {
    Multiclass,
    Pair(usize, usize),
    OneVsAll(usize),
}

impl<M: ProbabilisticClassifier> EnsembleModels<M> {
    pub fn families(&self) -> Families {
        Families {
            multiclass: self.multiclass.is_some(),
            pairwise: self.pairwise.is_some(),
            ova: self.ova.is_some(),
        }
    }

    /// Probability table for one feature row; needs the pairwise family.
    pub fn table(&self, row: &[f64]) -> Result<ProbabilityTable> {
        let pw = self
            .pairwise
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("no pairwise models were trained".into()))?;
        let pairwise = pw.iter().map(|m| m.predict_proba_row(row)[1]).collect();
        let ova = self
            .ova
            .as_ref()
            .map(|ms| ms.iter().map(|m| m.predict_proba_row(row)[1]).collect());
        ProbabilityTable::new(self.n_classes, pairwise, ova)
    }

    /// Table with only one-vs-all entries filled (pairwise set to 0.5).
    fn ova_only_table(&self, row: &[f64]) -> Result<ProbabilityTable> {
        let ms = self
            .ova
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("no one-vs-all models were trained".into()))?;
        let k = self.n_classes;
        ProbabilityTable::new(
            k,
            vec![0.5; k * (k - 1) / 2],
            Some(ms.iter().map(|m| m.predict_proba_row(row)[1]).collect()),
        )
    }

    pub fn decide_row(&self, row: &[f64], method: CouplingMethod, two_stage_thr: Option<f64>) -> Result<Coupled> {
        let mut out = match method {
            CouplingMethod::Multiclass => {
                let m = self
                    .multiclass
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("no multiclass model was trained".into()))?;
                Coupled::from_scores(m.predict_proba_row(row))
            }
            CouplingMethod::Ova if self.pairwise.is_none() => couple_ova(&self.ova_only_table(row)?)?,
            m => couple(&self.table(row)?, m)?,
        };
        if let Some(thr) = two_stage_thr {
            out.decision = two_stage_truck(out.decision, &self.table(row)?, thr);
        }
        Ok(out)
    }

    pub fn decide(&self, x: &Matrix, method: CouplingMethod, two_stage_thr: Option<f64>) -> Result<Vec<Coupled>> {
        (0..x.n_rows())
            .into_par_iter()
            .map(|i| self.decide_row(x.row(i), method, two_stage_thr))
            .collect()
    }
}

/// Fits the requested families. Each binary training set holds only the
/// rows of its classes and is resampled on its own.
pub fn train_families<F: ClassifierFactory>(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    families: Families,
    factory: &F,
    resample: &ResampleSpec,
) -> Result<EnsembleModels<F::Model>> {
    if x.n_rows() != y.len() {
        return Err(Error::InvalidParameter("x and y differ in length".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        if c >= n_classes {
            return Err(Error::InvalidParameter(format!("label {c} >= n_classes {n_classes}")));
        }
        counts[c] += 1;
    }
    if families.pairwise || families.ova {
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::AbsentClass(class_name(c, n_classes)));
        }
    }
    if counts.iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::InvalidParameter("training data needs at least 2 classes".into()));
    }

    let mut problems = Vec::new();
    if families.multiclass {
        problems.push(Problem::Multiclass);
    }
    if families.pairwise {
        problems.extend(pairs(n_classes).into_iter().map(|(i, j)| Problem::Pair(i, j)));
    }
    if families.ova {
        problems.extend((0..n_classes).map(Problem::OneVsAll));
    }

    let fitted = problems
        .par_iter()
        .enumerate()
        .map(|(idx, problem)| {
            let (rows, labels, k): (Vec<usize>, Vec<usize>, usize) = match *problem {
                Problem::Multiclass => ((0..y.len()).collect(), y.to_vec(), n_classes),
                Problem::Pair(i, j) => {
                    let rows: Vec<usize> = (0..y.len()).filter(|&r| y[r] == i || y[r] == j).collect();
                    let labels = rows.iter().map(|&r| usize::from(y[r] == i)).collect();
                    (rows, labels, 2)
                }
                Problem::OneVsAll(c) => ((0..y.len()).collect(), y.iter().map(|&v| usize::from(v == c)).collect(), 2),
            };
            let spec = ResampleSpec {
                seed: resample.seed.wrapping_add(idx as u64),
                ..resample.clone()
            };
            let sub = x.select_rows(&rows);
            let r = spec.apply(&sub, &labels, k)?;
            factory.fit(&r.x, &r.y, &r.weights, k)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut it = fitted.into_iter();
    let multiclass = if families.multiclass { it.next() } else { None };
    let pairwise = families
        .pairwise
        .then(|| it.by_ref().take(n_classes * (n_classes - 1) / 2).collect());
    let ova = families.ova.then(|| it.by_ref().take(n_classes).collect());
    Ok(EnsembleModels {
        n_classes,
        multiclass,
        pairwise,
        ova,
    })
}

fn class_name(c: usize, n_classes: usize) -> String {
    match ClassLabel::from_code(c) {
        Some(l) if n_classes == ClassLabel::COUNT => l.name().to_string(),
        _ => format!("class {c}"),
    }
}

/// A coupling method with the models it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarizedModel<M> {
    pub method: CouplingMethod,
    pub two_stage_thr: Option<f64>,
    pub models: EnsembleModels<M>,
}

impl<M: ProbabilisticClassifier> BinarizedModel<M> {
    pub fn n_classes(&self) -> usize {
        self.models.n_classes
    }

    pub fn decide(&self, x: &Matrix) -> Result<Vec<Coupled>> {
        self.models.decide(x, self.method, self.two_stage_thr)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.decide(x)?.into_iter().map(|c| c.decision).collect())
    }
}

pub fn train_binarized<F: ClassifierFactory>(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    method: CouplingMethod,
    two_stage_thr: Option<f64>,
    factory: &F,
    resample: &ResampleSpec,
) -> Result<BinarizedModel<F::Model>> {
    let mut families = method.families();
    if two_stage_thr.is_some() {
        families.pairwise = true;
    }
    Ok(BinarizedModel {
        method,
        two_stage_thr,
        models: train_families(x, y, n_classes, families, factory, resample)?,
    })
}
