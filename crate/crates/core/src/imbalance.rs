//! Training-time resampling for imbalanced class distributions.
//!
//! Every resampler starts by putting the rows in canonical content order,
//! so the result depends only on the multiset of rows and the seed.
//! Neighbour searches run on z-scored features fitted to the input.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::balanced_sample_weights;
use crate::dataset::{canonical_order, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    #[default]
    None,
    RandomUnder,
    RandomOver,
    Tomek,
    Smote,
    SmoteTomek,
    CustomUnder,
}

impl ResampleMethod {
    pub const ALL: [ResampleMethod; 7] = [
        ResampleMethod::None,
        ResampleMethod::RandomUnder,
        ResampleMethod::RandomOver,
        ResampleMethod::Tomek,
        ResampleMethod::Smote,
        ResampleMethod::SmoteTomek,
        ResampleMethod::CustomUnder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResampleMethod::None => "none",
            ResampleMethod::RandomUnder => "random_under",
            ResampleMethod::RandomOver => "random_over",
            ResampleMethod::Tomek => "tomek",
            ResampleMethod::Smote => "smote",
            ResampleMethod::SmoteTomek => "smote_tomek",
            ResampleMethod::CustomUnder => "custom_under",
        }
    }
}

impl fmt::Display for ResampleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResampleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ResampleMethod::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown resampling method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleSpec {
    pub method: ResampleMethod,
    pub k_neighbors: usize,
    pub floor_multiple: usize,
    /// Weight rows inversely to their class share after resampling.
    pub class_weighting: bool,
    pub seed: u64,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        ResampleSpec {
            method: ResampleMethod::None,
            k_neighbors: 5,
            floor_multiple: 5,
            class_weighting: false,
            seed: 0,
        }
    }
}

impl ResampleSpec {
    pub fn new(method: ResampleMethod) -> Self {
        ResampleSpec {
            method,
            ..ResampleSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::InvalidParameter("k_neighbors must be >= 1".into()));
        }
        if self.floor_multiple == 0 {
            return Err(Error::InvalidParameter("floor_multiple must be >= 1".into()));
        }
        Ok(())
    }

    /// Short label such as `smote_tomek+cw`.
    pub fn label(&self) -> String {
        if self.class_weighting {
            format!("{}+cw", self.method)
        } else {
            self.method.to_string()
        }
    }

    /// Resamples `(x, y)` and attaches row weights.
    pub fn apply(&self, x: &Matrix, y: &[usize], n_classes: usize) -> Result<Resampled> {
        self.validate()?;
        let mut out = match self.method {
            ResampleMethod::None => identity(x, y),
            ResampleMethod::RandomUnder => random_undersample(x, y, n_classes, self.seed)?,
            ResampleMethod::RandomOver => random_oversample(x, y, n_classes, self.seed)?,
            ResampleMethod::Tomek => tomek_remove(x, y, n_classes)?,
            ResampleMethod::Smote => smote(x, y, n_classes, self.k_neighbors, self.seed)?,
            ResampleMethod::SmoteTomek => smote_tomek(x, y, n_classes, self.k_neighbors, self.seed)?,
            ResampleMethod::CustomUnder => custom_undersample(x, y, n_classes, self.floor_multiple, self.seed)?,
        };
        out.weights = if self.class_weighting {
            balanced_sample_weights(&out.y, n_classes)
        } else {
            vec![1.0; out.y.len()]
        };
        Ok(out)
    }
}

/// Output of a resampler. `source[i]` is the input row that row `i` copies,
/// or `None` for a synthetic row.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub source: Vec<Option<usize>>,
    pub weights: Vec<f64>,
}

impl Resampled {
    fn from_sources(x: &Matrix, y: &[usize], rows: &[usize]) -> Self {
        Resampled {
            x: x.select_rows(rows),
            y: rows.iter().map(|&i| y[i]).collect(),
            source: rows.iter().map(|&i| Some(i)).collect(),
            weights: vec![1.0; rows.len()],
        }
    }

    pub fn class_counts(&self, n_classes: usize) -> Vec<usize> {
        counts(&self.y, n_classes)
    }
}

fn counts(y: &[usize], n_classes: usize) -> Vec<usize> {
    let mut c = vec![0; n_classes];
    for &k in y {
        c[k] += 1;
    }
    c
}

fn check(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::InvalidParameter("x and y differ in length".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {bad} >= n_classes {n_classes}")));
    }
    let present = counts(y, n_classes).iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::InvalidParameter(format!(
            "resampling needs at least 2 classes, found {present}"
        )));
    }
    Ok(())
}

/// Canonically ordered row indices of each class.
fn rows_by_class(x: &Matrix, y: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut by = vec![Vec::new(); n_classes];
    for i in canonical_order(x, y) {
        by[y[i]].push(i);
    }
    by
}

fn identity(x: &Matrix, y: &[usize]) -> Resampled {
    Resampled::from_sources(x, y, &(0..y.len()).collect::<Vec<_>>())
}

/// Caps every class at `cap` rows, drawn without replacement.
fn cap_classes(x: &Matrix, y: &[usize], n_classes: usize, cap: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for rows in rows_by_class(x, y, n_classes) {
        if rows.len() <= cap {
            keep.extend(rows);
        } else {
            let mut chosen: Vec<usize> = sample(&mut rng, rows.len(), cap).into_iter().collect();
            chosen.sort_unstable();
            keep.extend(chosen.into_iter().map(|k| rows[k]));
        }
    }
    keep
}

fn min_present(y: &[usize], n_classes: usize) -> usize {
    counts(y, n_classes).into_iter().filter(|&c| c > 0).min().unwrap_or(0)
}

pub fn random_undersample(x: &Matrix, y: &[usize], n_classes: usize, seed: u64) -> Result<Resampled> {
    check(x, y, n_classes)?;
    let keep = cap_classes(x, y, n_classes, min_present(y, n_classes), seed);
    Ok(Resampled::from_sources(x, y, &keep))
}

/// Caps each class at `floor_multiple` times the smallest class size.
pub fn custom_undersample(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    floor_multiple: usize,
    seed: u64,
) -> Result<Resampled> {
    check(x, y, n_classes)?;
    if floor_multiple == 0 {
        return Err(Error::InvalidParameter("floor_multiple must be >= 1".into()));
    }
    let cap = floor_multiple * min_present(y, n_classes);
    let keep = cap_classes(x, y, n_classes, cap, seed);
    Ok(Resampled::from_sources(x, y, &keep))
}

/// Replicates rows (with replacement) until every class has the majority count.
pub fn random_oversample(x: &Matrix, y: &[usize], n_classes: usize, seed: u64) -> Result<Resampled> {
    check(x, y, n_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by = rows_by_class(x, y, n_classes);
    let target = by.iter().map(Vec::len).max().unwrap_or(0);
    let mut rows: Vec<usize> = by.iter().flatten().copied().collect();
    for class_rows in by.iter().filter(|r| !r.is_empty()) {
        for _ in class_rows.len()..target {
            rows.push(class_rows[rng.gen_range(0..class_rows.len())]);
        }
    }
    Ok(Resampled::from_sources(x, y, &rows))
}

/// Per-feature z-scoring. Constant features get scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.n_rows().max(1) as f64;
        let d = x.n_cols();
        let mut mean = vec![0.0; d];
        for r in x.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in x.rows() {
            for j in 0..d {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut z = x.clone();
        for i in 0..x.n_rows() {
            for j in 0..x.n_cols() {
                z.set(i, j, (x.get(i, j) - self.mean[j]) / self.scale[j]);
            }
        }
        z
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// The `k` nearest rows to `query` among `candidates` (excluding `query`
/// itself), ordered by distance then by position in `candidates`.
fn k_nearest(z: &Matrix, candidates: &[usize], query: usize, k: usize) -> Vec<usize> {
    let q = z.row(query);
    let mut d: Vec<(f64, usize, usize)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != query)
        .map(|(pos, &c)| (sq_dist(q, z.row(c)), pos, c))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|t| t.2).collect()
}

/// Mutual nearest-neighbour pairs with different labels, as
/// `(earlier, later)` in canonical order.
pub fn tomek_links(x: &Matrix, y: &[usize]) -> Vec<(usize, usize)> {
    let z = Standardizer::fit(x).transform(x);
    let order = canonical_order(x, y);
    let nn: Vec<Option<usize>> = order
        .par_iter()
        .map(|&i| k_nearest(&z, &order, i, 1).first().copied())
        .collect();
    let mut rank = vec![0; y.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut links = Vec::new();
    for (r, &i) in order.iter().enumerate() {
        if let Some(j) = nn[r] {
            if rank[j] > r && nn[rank[j]] == Some(i) && y[i] != y[j] {
                links.push((i, j));
            }
        }
    }
    links
}

/// One pass of Tomek-link cleaning: in every link the member from the larger
/// class is dropped (the later row in canonical order when sizes are equal).
pub fn tomek_remove(x: &Matrix, y: &[usize], n_classes: usize) -> Result<Resampled> {
    check(x, y, n_classes)?;
    let c = counts(y, n_classes);
    let mut drop = vec![false; y.len()];
    for (a, b) in tomek_links(x, y) {
        let victim = if c[y[a]] > c[y[b]] { a } else { b };
        drop[victim] = true;
    }
    let keep: Vec<usize> = canonical_order(x, y).into_iter().filter(|&i| !drop[i]).collect();
    Ok(Resampled::from_sources(x, y, &keep))
}

/// SMOTE: raises every class to the majority count with points interpolated
/// between a random class member and one of its `k` nearest classmates.
pub fn smote(x: &Matrix, y: &[usize], n_classes: usize, k: usize, seed: u64) -> Result<Resampled> {
    check(x, y, n_classes)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k_neighbors must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Standardizer::fit(x).transform(x);
    let by = rows_by_class(x, y, n_classes);
    let target = by.iter().map(Vec::len).max().unwrap_or(0);
    let originals: Vec<usize> = canonical_order(x, y);
    let mut out = Resampled::from_sources(x, y, &originals);
    for (class, rows) in by.iter().enumerate() {
        if rows.is_empty() || rows.len() >= target {
            continue;
        }
        let need = target - rows.len();
        if rows.len() == 1 {
            log::warn!("class {class} has a single sample; SMOTE falls back to replication");
            for _ in 0..need {
                out.x.push_row(x.row(rows[0]))?;
                out.y.push(class);
                out.source.push(Some(rows[0]));
            }
            continue;
        }
        let kk = k.min(rows.len() - 1);
        let neighbours: Vec<Vec<usize>> = rows.par_iter().map(|&i| k_nearest(&z, rows, i, kk)).collect();
        let mut synth = vec![0.0; x.n_cols()];
        for _ in 0..need {
            let b = rng.gen_range(0..rows.len());
            let nb = neighbours[b][rng.gen_range(0..neighbours[b].len())];
            let u: f64 = rng.gen();
            for (j, s) in synth.iter_mut().enumerate() {
                let base = x.get(rows[b], j);
                *s = base + u * (x.get(nb, j) - base);
            }
            out.x.push_row(&synth)?;
            out.y.push(class);
            out.source.push(None);
        }
    }
    out.weights = vec![1.0; out.y.len()];
    Ok(out)
}

/// [`smote`] followed by [`tomek_remove`] on the combined rows.
pub fn smote_tomek(x: &Matrix, y: &[usize], n_classes: usize, k: usize, seed: u64) -> Result<Resampled> {
    let s = smote(x, y, n_classes, k, seed)?;
    let t = tomek_remove(&s.x, &s.y, n_classes)?;
    let source = t.source.iter().map(|r| r.and_then(|i| s.source[i])).collect();
    Ok(Resampled { source, ..t })
}

/// Whether two matrices hold the same multiset of (row, label) pairs.
pub fn same_rows(a: &Matrix, ya: &[usize], b: &Matrix, yb: &[usize]) -> bool {
    if a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols() {
        return false;
    }
    let (oa, ob) = (canonical_order(a, ya), canonical_order(b, yb));
    oa.iter().zip(&ob).all(|(&i, &j)| {
        ya[i] == yb[j] && a.row(i).iter().zip(b.row(j)).all(|(p, q)| p.total_cmp(q).is_eq())
    })
}
