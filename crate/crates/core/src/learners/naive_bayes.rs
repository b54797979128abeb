//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{check_fit_inputs, Classifier};

const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
    pub epsilon: f64,
}

pub fn train_naive_bayes(x: &Matrix, y: &[u8], w: Option<&[f64]>) -> Result<NaiveBayesModel> {
    check_fit_inputs(x, y, w)?;
    let p = x.n_cols();
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let mut tot = [0.0; 2];
    let mut mean = [vec![0.0; p], vec![0.0; p]];
    for (i, &c) in y.iter().enumerate() {
        let c = c as usize;
        tot[c] += weight(i);
        for (m, v) in mean[c].iter_mut().zip(x.row(i)) {
            *m += weight(i) * v;
        }
    }
    if tot[0] <= 0.0 || tot[1] <= 0.0 {
        return Err(Error::data("naive Bayes needs both classes present"));
    }
    for c in 0..2 {
        mean[c].iter_mut().for_each(|m| *m /= tot[c]);
    }
    let mut var = [vec![0.0; p], vec![0.0; p]];
    for (i, &c) in y.iter().enumerate() {
        let c = c as usize;
        for ((s, m), v) in var[c].iter_mut().zip(&mean[c]).zip(x.row(i)) {
            *s += weight(i) * (v - m) * (v - m);
        }
    }
    for c in 0..2 {
        var[c].iter_mut().for_each(|s| *s /= tot[c]);
    }
    // smoothing scales with the widest overall feature variance
    let all = tot[0] + tot[1];
    let max_var = (0..p)
        .map(|j| {
            let mu = (0..y.len()).map(|i| weight(i) * x.get(i, j)).sum::<f64>() / all;
            (0..y.len())
                .map(|i| weight(i) * (x.get(i, j) - mu).powi(2))
                .sum::<f64>()
                / all
        })
        .fold(0.0, f64::max);
    let epsilon = if max_var > 0.0 { VAR_SMOOTHING * max_var } else { VAR_SMOOTHING };
    for v in var.iter_mut().flatten() {
        *v += epsilon;
    }
    Ok(NaiveBayesModel {
        log_prior: [(tot[0] / all).ln(), (tot[1] / all).ln()],
        mean,
        var,
        epsilon,
    })
}

impl NaiveBayesModel {
    pub fn joint_log_likelihood(&self, row: &[f64]) -> [f64; 2] {
        let mut out = self.log_prior;
        for (c, o) in out.iter_mut().enumerate() {
            for ((x, m), v) in row.iter().zip(&self.mean[c]).zip(&self.var[c]) {
                *o -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v);
            }
        }
        out
    }
}

impl Classifier for NaiveBayesModel {
    fn n_features(&self) -> usize {
        self.mean[0].len()
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        let j = self.joint_log_likelihood(row);
        let m = j[0].max(j[1]);
        let (a, b) = ((j[0] - m).exp(), (j[1] - m).exp());
        [a / (a + b), b / (a + b)]
    }
}
