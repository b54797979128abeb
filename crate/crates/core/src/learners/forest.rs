//! Random forest: bootstrap-weighted CART trees with per-split feature
//! subsampling, probabilities averaged over trees.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

use super::tree::{effective_weights, DecisionTreeModel, FitData, MaxFeatures, TreeParams};
use super::{check_fit_inputs, Classifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            bootstrap: true,
            tree: TreeParams {
                max_features: MaxFeatures::Sqrt,
                ..Default::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub n_features: usize,
    pub params: ForestParams,
}

pub fn train_random_forest(x: &Matrix, y: &[u8], w: Option<&[f64]>, params: &ForestParams) -> Result<RandomForestModel> {
    check_fit_inputs(x, y, w)?;
    if params.n_estimators == 0 {
        return Err(Error::invalid("n_estimators must be at least 1"));
    }
    let weights = effective_weights(y, w, params.tree.class_weight);
    let n = y.len();
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(params.seed, t as u64);
            let mut mult = vec![0u32; n];
            if params.bootstrap {
                for _ in 0..n {
                    mult[rng.random_range(0..n)] += 1;
                }
            } else {
                mult.fill(1);
            }
            let w: Vec<f64> = weights
                .iter()
                .zip(&mult)
                .map(|(w, &m)| w * m as f64)
                .collect();
            let mut rows: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
            if rows.is_empty() {
                rows = (0..n).collect();
            }
            let d = FitData {
                x,
                y,
                w: &w,
                mult: &mult,
            };
            DecisionTreeModel::fit_rows(d, &mut rows, &params.tree, rng)
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        n_features: x.n_cols(),
        params: params.clone(),
    })
}

impl Classifier for RandomForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        let mut p1 = 0.0;
        for t in &self.trees {
            p1 += t.proba_row(row)[1];
        }
        let p1 = p1 / self.trees.len() as f64;
        [1.0 - p1, p1]
    }
}
