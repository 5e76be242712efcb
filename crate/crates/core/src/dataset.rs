//! Dense feature matrices and labelled training sets.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data_model::ClassLabel;
use crate::error::{Error, Result};
use crate::features::FeatureTable;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn with_cols(n_cols: usize) -> Self {
        Matrix {
            n_rows: 0,
            n_cols,
            data: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Matrix::with_cols(n_cols);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::InvalidParameter(format!(
                "row of length {} pushed into matrix with {} columns",
                row.len(),
                self.n_cols
            )));
        }
        self.data.extend_from_slice(row);
        self.n_rows += 1;
        Ok(())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Lexicographic comparison of two rows by value (`total_cmp` per column).
pub fn compare_rows(x: &Matrix, a: usize, b: usize) -> Ordering {
    x.row(a)
        .iter()
        .zip(x.row(b))
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Row indices sorted by content, then label. Any permutation of the same
/// rows yields the same sequence of (row, label) pairs.
pub fn canonical_order(x: &Matrix, y: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    order.sort_by(|&a, &b| compare_rows(x, a, b).then(y[a].cmp(&y[b])));
    order
}

/// Feature rows with class labels, grouping ids and augmentation flags.
///
/// `groups` holds the cluster id of each row; rows sharing a group must
/// never be split between training and test data. Augmented rows are
/// only ever used for fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledData {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub groups: Vec<i64>,
    pub augmented: Vec<bool>,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
}

impl LabeledData {
    pub fn new(
        x: Matrix,
        y: Vec<usize>,
        groups: Vec<i64>,
        n_classes: usize,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = x.n_rows();
        if y.len() != n || groups.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} rows but {} labels and {} groups",
                n,
                y.len(),
                groups.len()
            )));
        }
        if feature_names.len() != x.n_cols() {
            return Err(Error::InvalidParameter("feature name count differs from column count".into()));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::InvalidParameter(format!("label {bad} >= n_classes {n_classes}")));
        }
        Ok(LabeledData {
            x,
            y,
            groups,
            augmented: vec![false; n],
            n_classes,
            feature_names,
        })
    }

    /// Builds a six-class set from feature tables; rows of `augmented`
    /// are flagged for training-only use.
    pub fn from_tables(original: &FeatureTable, augmented: Option<&FeatureTable>) -> Result<Self> {
        if let Some(a) = augmented {
            if a.names != original.names {
                return Err(Error::data("feature tables", "augmented table has different columns"));
            }
        }
        let mut x = Matrix::with_cols(original.names.len());
        let (mut y, mut groups, mut flags) = (Vec::new(), Vec::new(), Vec::new());
        let tables = std::iter::once((original, false)).chain(augmented.map(|a| (a, true)));
        for (table, flag) in tables {
            for row in &table.rows {
                x.push_row(&row.values)?;
                y.push(row.label.code());
                groups.push(row.cluster_id);
                flags.push(flag);
            }
        }
        let mut data = LabeledData::new(x, y, groups, ClassLabel::COUNT, original.names.clone())?;
        data.augmented = flags;
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn subset_rows(&self, idx: &[usize]) -> LabeledData {
        LabeledData {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            augmented: idx.iter().map(|&i| self.augmented[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn subset_cols(&self, cols: &[usize]) -> LabeledData {
        LabeledData {
            x: self.x.select_cols(cols),
            y: self.y.clone(),
            groups: self.groups.clone(),
            augmented: self.augmented.clone(),
            n_classes: self.n_classes,
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &k in &self.y {
            c[k] += 1;
        }
        c
    }

    /// Indices of non-augmented rows.
    pub fn original_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.augmented[i]).collect()
    }
}
