use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tabular::Dataset;

use super::ridge::{fit_bayesian_ridge, RidgeFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMode {
    /// One ordered pass over the incomplete columns.
    SinglePass,
    /// Repeat passes until imputed cells stop moving.
    Converge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeOptions {
    pub max_rounds: usize,
    pub tol: f64,
    pub mode: ImputeMode,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        ImputeOptions {
            max_rounds: 10,
            tol: 1e-3,
            mode: ImputeMode::Converge,
        }
    }
}

/// Regressors learned by [`iterative_impute`], replayable on other data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeImputer {
    pub codes: Vec<String>,
    /// Incomplete columns, fewest missing cells first.
    pub order: Vec<usize>,
    /// Initial fill per column (training mean of observed cells).
    pub fill: Vec<f64>,
    /// Valid code range for ordinal columns.
    pub ranges: Vec<Option<(f64, f64)>>,
    /// `rounds[r][k]` predicts column `order[k]` from all other columns.
    pub rounds: Vec<Vec<RidgeFit>>,
}

fn others(row: &[f64], skip: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(row.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, v)| *v));
}

impl IterativeImputer {
    fn finish(&self, col: usize, v: f64) -> f64 {
        match self.ranges[col] {
            Some((lo, hi)) => v.round().clamp(lo, hi),
            None => v,
        }
    }

    fn initial_fill(&self, ds: &Dataset) -> Matrix {
        let mut values = ds.values().clone();
        for r in 0..ds.n_rows() {
            let missing_all = (0..ds.n_features()).all(|c| ds.is_missing(r, c));
            if missing_all && ds.n_features() > 0 {
                warn!("row {} has every feature missing; filled with column means", r);
            }
            for c in 0..ds.n_features() {
                if ds.is_missing(r, c) {
                    values.set(r, c, self.fill[c]);
                }
            }
        }
        values
    }

    /// Fill the missing cells of `ds` by replaying the stored regressors.
    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.feature_codes() != self.codes {
            return Err(Error::data(
                "imputer applied to a dataset with different columns",
            ));
        }
        if ds.missing_count() == 0 {
            return Ok(ds.clone());
        }
        let mut values = self.initial_fill(ds);
        let mut buf = Vec::new();
        for round in &self.rounds {
            for (k, &col) in self.order.iter().enumerate() {
                for r in 0..ds.n_rows() {
                    if ds.is_missing(r, col) {
                        others(values.row(r), col, &mut buf);
                        let v = self.finish(col, round[k].predict(&buf));
                        values.set(r, col, v);
                    }
                }
            }
        }
        ds.with_complete_values(values)
    }
}

/// Fit-and-fill: each incomplete column is regressed on all other columns
/// with Bayesian ridge, starting from the column with the fewest missing
/// cells. Missing cells start at the column mean.
pub fn iterative_impute(train: &Dataset, opts: &ImputeOptions) -> Result<(Dataset, IterativeImputer)> {
    let n = train.n_rows();
    let d = train.n_features();
    let mut fill = Vec::with_capacity(d);
    let mut counts = Vec::with_capacity(d);
    for c in 0..d {
        let obs = train.observed(c);
        let missing = n - obs.len();
        if missing > 0 && obs.is_empty() {
            return Err(Error::data(format!(
                "column {} has no observed values to impute from",
                train.features()[c].code
            )));
        }
        fill.push(if obs.is_empty() {
            0.0
        } else {
            obs.iter().sum::<f64>() / obs.len() as f64
        });
        counts.push(missing);
    }
    let mut order: Vec<usize> = (0..d).filter(|&c| counts[c] > 0).collect();
    order.sort_by_key(|&c| (counts[c], c));
    let ranges = train
        .features()
        .iter()
        .map(|f| f.max_code().map(|m| (0.0, m)))
        .collect();

    let mut imputer = IterativeImputer {
        codes: train.feature_codes(),
        order,
        fill,
        ranges,
        rounds: Vec::new(),
    };
    if imputer.order.is_empty() {
        return Ok((train.clone(), imputer));
    }

    let mut values = imputer.initial_fill(train);
    let max_rounds = match opts.mode {
        ImputeMode::SinglePass => 1,
        ImputeMode::Converge => opts.max_rounds.max(1),
    };
    let mut buf = Vec::new();
    for round in 0..max_rounds {
        let mut fits = Vec::with_capacity(imputer.order.len());
        let mut max_change: f64 = 0.0;
        for &col in &imputer.order {
            let obs_rows: Vec<usize> = (0..n).filter(|&r| !train.is_missing(r, col)).collect();
            let mut x = Matrix::zeros(0, d - 1);
            let mut y = Vec::with_capacity(obs_rows.len());
            for &r in &obs_rows {
                others(values.row(r), col, &mut buf);
                x.push_row(&buf);
                y.push(values.get(r, col));
            }
            let fit = if obs_rows.len() >= 2 {
                fit_bayesian_ridge(&x, &y)?
            } else {
                RidgeFit {
                    weights: vec![0.0; d - 1],
                    intercept: imputer.fill[col],
                    alpha: 1.0,
                    lambda: 1.0,
                    n_iter: 0,
                }
            };
            for r in 0..n {
                if train.is_missing(r, col) {
                    others(values.row(r), col, &mut buf);
                    let v = imputer.finish(col, fit.predict(&buf));
                    max_change = max_change.max((v - values.get(r, col)).abs());
                    values.set(r, col, v);
                }
            }
            fits.push(fit);
        }
        imputer.rounds.push(fits);
        debug!("imputation round {} max change {max_change:.3e}", round + 1);
        if max_change < opts.tol {
            break;
        }
    }
    let out = train.with_complete_values(values)?;
    Ok((out, imputer))
}
