//! L2-regularised logistic regression fitted by gradient descent with a
//! Barzilai-Borwein trial step and Armijo backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::scaling::Standardizer;
use super::{check_fit_inputs, sigmoid, Classifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse regularisation strength.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            c: 1.0,
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionModel {
    /// Coefficients on the original feature scale.
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub l2_strength: f64,
    pub n_iter: usize,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Objective and gradient at `beta = [b0, b1..bp]` on already scaled
/// inputs: `(1/W)[Σ wᵢ ℓᵢ + ‖b₁..‖²/(2C)]`. The intercept is not penalised.
pub fn logistic_objective(beta: &[f64], x: &Matrix, y: &[u8], w: &[f64], c: f64) -> (f64, Vec<f64>) {
    let total: f64 = w.iter().sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; beta.len()];
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let z = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        let yi = f64::from(y[i]);
        loss += w[i] * (log1p_exp(z) - yi * z);
        let r = w[i] * (sigmoid(z) - yi);
        grad[0] += r;
        for (g, v) in grad[1..].iter_mut().zip(row) {
            *g += r * v;
        }
    }
    let pen: f64 = beta[1..].iter().map(|b| b * b).sum::<f64>() / (2.0 * c);
    for (g, b) in grad[1..].iter_mut().zip(&beta[1..]) {
        *g += b / c;
    }
    grad.iter_mut().for_each(|g| *g /= total);
    ((loss + pen) / total, grad)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn train_logistic_regression(
    x: &Matrix,
    y: &[u8],
    w: Option<&[f64]>,
    params: &LogisticParams,
) -> Result<LogisticRegressionModel> {
    check_fit_inputs(x, y, w)?;
    if !(params.c > 0.0) {
        return Err(Error::invalid("C must be positive"));
    }
    let w: Vec<f64> = w.map_or_else(|| vec![1.0; y.len()], <[f64]>::to_vec);
    let scaler = Standardizer::fit(x, &w);
    let xs = scaler.transform(x);
    let mut beta = vec![0.0; x.n_cols() + 1];
    let (mut f, mut g) = logistic_objective(&beta, &xs, y, &w, params.c);
    let mut step = 1.0;
    let mut n_iter = 0;
    while n_iter < params.max_iter && max_abs(&g) >= params.tol {
        n_iter += 1;
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let mut t = step;
        let (nb, nf, ng) = loop {
            let cand: Vec<f64> = beta.iter().zip(&g).map(|(b, d)| b - t * d).collect();
            let (cf, cg) = logistic_objective(&cand, &xs, y, &w, params.c);
            if cf <= f - 1e-4 * t * gg || t < 1e-20 {
                break (cand, cf, cg);
            }
            t *= 0.5;
        };
        let s: Vec<f64> = nb.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let d: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&d).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        step = if sy > 0.0 { ss / sy } else { 1.0 };
        let stalled = nf >= f && t < 1e-20;
        beta = nb;
        f = nf;
        g = ng;
        if stalled {
            break;
        }
    }
    let (intercept, coef) = scaler.unscale(beta[0], &beta[1..]);
    Ok(LogisticRegressionModel {
        intercept,
        coef,
        l2_strength: 1.0 / params.c,
        n_iter,
    })
}

impl LogisticRegressionModel {
    pub fn decision_function(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl Classifier for LogisticRegressionModel {
    fn n_features(&self) -> usize {
        self.coef.len()
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        let p = sigmoid(self.decision_function(row));
        [1.0 - p, p]
    }
}
