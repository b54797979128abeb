use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::schema::{ColumnKind, ColumnMeta, Schema};

/// Class 0 of the binary target.
pub const DISCONTENT: u8 = 0;
/// Class 1 of the binary target.
pub const CONTENT: u8 = 1;

/// Row ids at or above this value mark rows that were synthesized rather
/// than read from input.
pub const SYNTHETIC_ROW_BIT: u64 = 1 << 63;

pub fn class_name(label: u8) -> &'static str {
    if label == CONTENT {
        "Content"
    } else {
        "Discontent"
    }
}

/// Column-aware table of encoded survey responses.
///
/// `values` holds only feature columns. Masked cells always store `0.0` so
/// that byte-level comparisons are stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<ColumnMeta>,
    target: ColumnMeta,
    label_threshold: Option<f64>,
    values: Matrix,
    missing: Vec<bool>,
    labels: Option<Vec<u8>>,
    row_ids: Vec<u64>,
}

impl Dataset {
    pub fn new(
        schema: &Schema,
        values: Matrix,
        missing: Vec<bool>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        schema.validate()?;
        let n = values.n_rows();
        Self::from_parts(
            schema.features().cloned().collect(),
            schema.target_column().clone(),
            schema.label_threshold,
            values,
            missing,
            labels,
            (0..n as u64).collect(),
        )
    }

    pub(crate) fn from_parts(
        features: Vec<ColumnMeta>,
        target: ColumnMeta,
        label_threshold: Option<f64>,
        mut values: Matrix,
        missing: Vec<bool>,
        labels: Option<Vec<u8>>,
        row_ids: Vec<u64>,
    ) -> Result<Self> {
        if values.n_cols() != features.len() {
            return Err(Error::invalid(format!(
                "{} value columns for {} feature columns",
                values.n_cols(),
                features.len()
            )));
        }
        if missing.len() != values.n_rows() * values.n_cols() {
            return Err(Error::invalid("missing mask shape differs from values"));
        }
        if let Some(l) = &labels {
            if l.len() != values.n_rows() {
                return Err(Error::invalid(format!(
                    "{} labels for {} rows",
                    l.len(),
                    values.n_rows()
                )));
            }
            if l.iter().any(|&v| v > 1) {
                return Err(Error::invalid("labels must be 0 or 1"));
            }
        }
        if row_ids.len() != values.n_rows() {
            return Err(Error::invalid("row id count differs from row count"));
        }
        let nc = values.n_cols();
        for (i, &m) in missing.iter().enumerate() {
            if m {
                values.set(i / nc, i % nc, 0.0);
            } else if !values.get(i / nc, i % nc).is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite value at row {}, column {}",
                    i / nc,
                    features[i % nc].code
                )));
            }
        }
        Ok(Dataset {
            features,
            target,
            label_threshold,
            values,
            missing,
            labels,
            row_ids,
        })
    }

    /// Build a complete (no missing cells) dataset from feature rows.
    pub fn from_rows<R: AsRef<[f64]>>(
        schema: &Schema,
        rows: &[R],
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n_feat = schema.features().count();
        let values = if rows.is_empty() {
            Matrix::zeros(0, n_feat)
        } else {
            Matrix::from_rows(rows)?
        };
        let missing = vec![false; values.n_rows() * values.n_cols()];
        Self::new(schema, values, missing, labels)
    }

    pub fn schema(&self) -> Schema {
        let mut columns = self.features.clone();
        columns.push(self.target.clone());
        Schema {
            target: self.target.code.clone(),
            label_threshold: self.label_threshold,
            columns,
        }
    }

    pub fn features(&self) -> &[ColumnMeta] {
        &self.features
    }

    pub fn target(&self) -> &ColumnMeta {
        &self.target
    }

    pub fn feature_codes(&self) -> Vec<String> {
        self.features.iter().map(|c| c.code.clone()).collect()
    }

    pub fn feature_index(&self, code: &str) -> Option<usize> {
        self.features.iter().position(|c| c.code == code)
    }

    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.values.n_cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn value(&self, r: usize, c: usize) -> f64 {
        self.values.get(r, c)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.values.row(r)
    }

    pub fn is_missing(&self, r: usize, c: usize) -> bool {
        self.missing[r * self.n_features() + c]
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::data("dataset has no labels"))
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    /// (count of class 0, count of class 1).
    pub fn class_counts(&self) -> Result<(usize, usize)> {
        let labels = self.require_labels()?;
        let ones = labels.iter().filter(|&&l| l == CONTENT).count();
        Ok((labels.len() - ones, ones))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let nc = self.n_features();
        let mut missing = Vec::with_capacity(idx.len() * nc);
        for &i in idx {
            missing.extend_from_slice(&self.missing[i * nc..(i + 1) * nc]);
        }
        Dataset {
            features: self.features.clone(),
            target: self.target.clone(),
            label_threshold: self.label_threshold,
            values: self.values.select_rows(idx),
            missing,
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            row_ids: idx.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let nc = self.n_features();
        let n = self.n_rows();
        let mut missing = Vec::with_capacity(n * cols.len());
        for r in 0..n {
            missing.extend(cols.iter().map(|&c| self.missing[r * nc + c]));
        }
        Dataset {
            features: cols.iter().map(|&c| self.features[c].clone()).collect(),
            target: self.target.clone(),
            label_threshold: self.label_threshold,
            values: self.values.select_cols(cols),
            missing,
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Keep the named columns, in the given order.
    pub fn select_codes<S: AsRef<str>>(&self, codes: &[S]) -> Result<Dataset> {
        let idx = codes
            .iter()
            .map(|c| {
                self.feature_index(c.as_ref())
                    .ok_or_else(|| Error::data(format!("column {} not in dataset", c.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&idx))
    }

    /// Remove the named columns; codes not present are ignored.
    pub fn drop_codes<S: AsRef<str>>(&self, codes: &[S]) -> Dataset {
        let drop: HashSet<&str> = codes.iter().map(|c| c.as_ref()).collect();
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&c| !drop.contains(self.features[c].code.as_str()))
            .collect();
        self.select_columns(&keep)
    }

    /// Replace all values, clearing the missing mask.
    pub fn with_complete_values(&self, values: Matrix) -> Result<Dataset> {
        let n = values.n_rows() * values.n_cols();
        Dataset::from_parts(
            self.features.clone(),
            self.target.clone(),
            self.label_threshold,
            values,
            vec![false; n],
            self.labels.clone(),
            self.row_ids.clone(),
        )
    }

    /// Replace features and values wholesale (e.g. after projection).
    pub fn with_features(&self, features: Vec<ColumnMeta>, values: Matrix) -> Result<Dataset> {
        let n = values.n_rows() * values.n_cols();
        Dataset::from_parts(
            features,
            self.target.clone(),
            self.label_threshold,
            values,
            vec![false; n],
            self.labels.clone(),
            self.row_ids.clone(),
        )
    }

    /// Append rows. Rows must be complete.
    pub fn append_rows(&self, rows: &Matrix, labels: &[u8], row_ids: &[u64]) -> Result<Dataset> {
        if rows.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: rows.n_cols(),
            });
        }
        let mut own = self.require_labels()?.to_vec();
        own.extend_from_slice(labels);
        let mut values = self.values.clone();
        for r in rows.rows() {
            values.push_row(r);
        }
        let mut missing = self.missing.clone();
        missing.extend(std::iter::repeat_n(false, rows.n_rows() * rows.n_cols()));
        let mut ids = self.row_ids.clone();
        ids.extend_from_slice(row_ids);
        Dataset::from_parts(
            self.features.clone(),
            self.target.clone(),
            self.label_threshold,
            values,
            missing,
            Some(own),
            ids,
        )
    }

    /// Overwrite values in place, keeping the mask. Masked cells are reset
    /// to `0.0`.
    pub(crate) fn replace_values(&mut self, values: Matrix) {
        debug_assert_eq!(values.n_rows(), self.values.n_rows());
        debug_assert_eq!(values.n_cols(), self.values.n_cols());
        self.values = values;
        let nc = self.values.n_cols();
        for (i, &m) in self.missing.iter().enumerate() {
            if m {
                self.values.set(i / nc, i % nc, 0.0);
            }
        }
    }

    pub fn without_labels(&self) -> Dataset {
        let mut d = self.clone();
        d.labels = None;
        d
    }

    /// Observed (unmasked) values of one column.
    pub fn observed(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows())
            .filter(|&r| !self.is_missing(r, c))
            .map(|r| self.value(r, c))
            .collect()
    }

    pub fn is_ordinal(&self, c: usize) -> bool {
        self.features[c].kind == ColumnKind::Ordinal
    }
}

/// Per-column fraction of masked cells.
pub fn missing_profile(ds: &Dataset) -> Vec<(String, f64)> {
    let n = ds.n_rows();
    ds.features()
        .iter()
        .enumerate()
        .map(|(c, meta)| {
            let frac = if n == 0 {
                0.0
            } else {
                (0..n).filter(|&r| ds.is_missing(r, c)).count() as f64 / n as f64
            };
            (meta.code.clone(), frac)
        })
        .collect()
}
