//! Binary classifiers sharing one contract: fit on (X, y, weights), then
//! `proba_row` returns `[p(class 0), p(class 1)]`.

pub mod adaboost;
pub mod boosting;
pub mod forest;
pub mod logistic;
pub mod naive_bayes;
mod params;
pub mod scaling;
pub mod svm;
pub mod tree;
pub mod voting;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use adaboost::{train_adaboost, AdaBoostModel, AdaBoostParams};
pub use boosting::{train_gradient_boosting, BoostParams, BoostedEnsembleModel, Growth};
pub use forest::{train_random_forest, ForestParams, RandomForestModel};
pub use logistic::{train_logistic_regression, LogisticParams, LogisticRegressionModel};
pub use naive_bayes::{train_naive_bayes, NaiveBayesModel};
pub use params::{fit_model, ModelKind, ModelSpec};
pub use svm::{train_linear_svm, LinearSvmModel, SvmParams};
pub use tree::{train_decision_tree, DecisionTreeModel, MaxFeatures, TreeParams};
pub use voting::{build_voting_ensemble, PriorModel, VotingEnsembleModel};

pub trait Classifier {
    fn n_features(&self) -> usize;
    /// Probabilities for one row; the caller guarantees its length.
    fn proba_row(&self, row: &[f64]) -> [f64; 2];
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Argmax with ties going to class 1.
pub fn label_of(p: [f64; 2]) -> u8 {
    u8::from(p[1] >= p[0])
}

pub(crate) fn check_fit_inputs(x: &Matrix, y: &[u8], w: Option<&[f64]>) -> Result<()> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::data("cannot fit on an empty matrix"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if y.iter().any(|&c| c > 1) {
        return Err(Error::data("labels must be 0 or 1"));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::data("feature matrix has non-finite values"));
    }
    if let Some(w) = w {
        if w.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                actual: w.len(),
            });
        }
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::data("sample weights must be finite and non-negative"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierModel {
    DecisionTree(DecisionTreeModel),
    RandomForest(RandomForestModel),
    Boosted(BoostedEnsembleModel),
    AdaBoost(AdaBoostModel),
    NaiveBayes(NaiveBayesModel),
    Logistic(LogisticRegressionModel),
    Svm(LinearSvmModel),
    Voting(VotingEnsembleModel),
    Prior(PriorModel),
}

impl ClassifierModel {
    fn inner(&self) -> &dyn Classifier {
        match self {
            ClassifierModel::DecisionTree(m) => m,
            ClassifierModel::RandomForest(m) => m,
            ClassifierModel::Boosted(m) => m,
            ClassifierModel::AdaBoost(m) => m,
            ClassifierModel::NaiveBayes(m) => m,
            ClassifierModel::Logistic(m) => m,
            ClassifierModel::Svm(m) => m,
            ClassifierModel::Voting(m) => m,
            ClassifierModel::Prior(m) => m,
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<[f64; 2]>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|r| self.proba_row(x.row(r)))
            .collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self.predict_proba(x)?.into_iter().map(label_of).collect())
    }

    /// Checked single-row probabilities.
    pub fn predict_proba_one(&self, row: &[f64]) -> Result<[f64; 2]> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        Ok(self.proba_row(row))
    }

    /// Normalised impurity-based importances for tree models.
    pub fn feature_importances(&self) -> Option<Vec<f64>> {
        fn normalise(v: &[f64]) -> Vec<f64> {
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                v.iter().map(|x| x / s).collect()
            } else {
                vec![0.0; v.len()]
            }
        }
        match self {
            ClassifierModel::DecisionTree(t) => Some(normalise(&t.impurity_decrease)),
            ClassifierModel::RandomForest(f) => {
                let mut acc = vec![0.0; f.n_features];
                for t in &f.trees {
                    for (a, v) in acc.iter_mut().zip(normalise(&t.impurity_decrease)) {
                        *a += v;
                    }
                }
                Some(normalise(&acc))
            }
            ClassifierModel::Boosted(b) => Some(normalise(&b.split_gain)),
            ClassifierModel::AdaBoost(a) => {
                let mut acc = vec![0.0; a.n_features];
                for (t, alpha) in a.learners.iter().zip(&a.alphas) {
                    for (x, v) in acc.iter_mut().zip(normalise(&t.impurity_decrease)) {
                        *x += alpha * v;
                    }
                }
                Some(normalise(&acc))
            }
            _ => None,
        }
    }
}

impl Classifier for ClassifierModel {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        self.inner().proba_row(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_content() {
        assert_eq!(label_of([0.5, 0.5]), 1);
        assert_eq!(label_of([0.6, 0.4]), 0);
    }

    #[test]
    fn dimension_mismatch() {
        let m = ClassifierModel::Prior(PriorModel { p1: 0.3, n_features: 3 });
        let x = Matrix::zeros(2, 4);
        assert!(matches!(m.predict_proba(&x), Err(Error::DimensionMismatch { .. })));
        assert!(m.predict_proba_one(&[1.0]).is_err());
    }
}
