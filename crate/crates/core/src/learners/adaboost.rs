//! Discrete AdaBoost over weighted decision stumps.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::tree::{train_decision_tree, DecisionTreeModel, TreeParams};
use super::{check_fit_inputs, sigmoid, Classifier};

const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams {
            n_estimators: 50,
            learning_rate: 1.0,
            max_depth: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub learners: Vec<DecisionTreeModel>,
    pub alphas: Vec<f64>,
    pub n_features: usize,
    pub params: AdaBoostParams,
}

fn vote(t: &DecisionTreeModel, row: &[f64]) -> f64 {
    let p = t.proba_row(row);
    if p[1] >= p[0] {
        1.0
    } else {
        -1.0
    }
}

impl AdaBoostModel {
    /// `Σ α_t h_t(x)` with `h_t ∈ {−1, +1}`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.learners
            .iter()
            .zip(&self.alphas)
            .map(|(t, a)| a * vote(t, row))
            .sum()
    }
}

impl Classifier for AdaBoostModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        let p = sigmoid(2.0 * self.margin(row));
        [1.0 - p, p]
    }
}

/// Also returns the normalised weights after each round.
pub fn train_adaboost_traced(
    x: &Matrix,
    y: &[u8],
    w: Option<&[f64]>,
    params: &AdaBoostParams,
) -> Result<(AdaBoostModel, Vec<Vec<f64>>)> {
    check_fit_inputs(x, y, w)?;
    if !(params.learning_rate > 0.0) {
        return Err(Error::invalid("learning_rate must be positive"));
    }
    let n = y.len();
    let mut d: Vec<f64> = w.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let total: f64 = d.iter().sum();
    if total <= 0.0 {
        return Err(Error::data("all sample weights are zero"));
    }
    d.iter_mut().for_each(|v| *v /= total);
    let signs: Vec<f64> = y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
    let stump = TreeParams {
        max_depth: Some(params.max_depth.max(1)),
        seed: params.seed,
        ..Default::default()
    };
    let mut model = AdaBoostModel {
        learners: Vec::new(),
        alphas: Vec::new(),
        n_features: x.n_cols(),
        params: params.clone(),
    };
    let mut trace = Vec::new();
    for _ in 0..params.n_estimators {
        let t = train_decision_tree(x, y, Some(&d), &stump)?;
        let h: Vec<f64> = (0..n).map(|i| vote(&t, x.row(i))).collect();
        let err: f64 = (0..n).filter(|&i| h[i] != signs[i]).map(|i| d[i]).sum();
        if err >= 0.5 {
            if model.learners.is_empty() {
                warn!("first AdaBoost learner is no better than chance");
            }
            break;
        }
        let perfect = err <= 0.0;
        let e = err.max(MIN_ERROR);
        let alpha = params.learning_rate * 0.5 * ((1.0 - e) / e).ln();
        for i in 0..n {
            d[i] *= (-alpha * signs[i] * h[i]).exp();
        }
        let s: f64 = d.iter().sum();
        d.iter_mut().for_each(|v| *v /= s);
        trace.push(d.clone());
        model.learners.push(t);
        model.alphas.push(alpha);
        if perfect {
            break;
        }
    }
    Ok((model, trace))
}

pub fn train_adaboost(x: &Matrix, y: &[u8], w: Option<&[f64]>, params: &AdaBoostParams) -> Result<AdaBoostModel> {
    train_adaboost_traced(x, y, w, params).map(|(m, _)| m)
}
