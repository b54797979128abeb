//! Soft voting over fitted members, plus a constant prior baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ClassifierModel, Classifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingEnsembleModel {
    pub members: Vec<ClassifierModel>,
    pub weights: Vec<f64>,
}

pub fn build_voting_ensemble(members: Vec<ClassifierModel>, weights: Option<Vec<f64>>) -> Result<VotingEnsembleModel> {
    if members.is_empty() {
        return Err(Error::invalid("a voting ensemble needs at least one member"));
    }
    let weights = weights.unwrap_or_else(|| vec![1.0; members.len()]);
    if weights.len() != members.len() {
        return Err(Error::DimensionMismatch {
            expected: members.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid("voting weights must be non-negative with a positive sum"));
    }
    let p = members[0].n_features();
    if let Some(m) = members.iter().find(|m| m.n_features() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: m.n_features(),
        });
    }
    Ok(VotingEnsembleModel { members, weights })
}

impl Classifier for VotingEnsembleModel {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        let total: f64 = self.weights.iter().sum();
        let p1 = self
            .members
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * m.proba_row(row)[1])
            .sum::<f64>()
            / total;
        [1.0 - p1, p1]
    }
}

/// Predicts the training class frequencies for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorModel {
    pub p1: f64,
    pub n_features: usize,
}

impl PriorModel {
    pub fn fit(y: &[u8], n_features: usize) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::data("cannot fit a prior on no rows"));
        }
        let p1 = y.iter().filter(|&&c| c == 1).count() as f64 / y.len() as f64;
        Ok(PriorModel { p1, n_features })
    }
}

impl Classifier for PriorModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, _row: &[f64]) -> [f64; 2] {
        [1.0 - self.p1, self.p1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(p1: f64) -> ClassifierModel {
        ClassifierModel::Prior(PriorModel { p1, n_features: 2 })
    }

    #[test]
    fn mean_of_two() {
        let v = build_voting_ensemble(vec![constant(0.2), constant(0.4)], None).unwrap();
        let p = v.proba_row(&[0.0, 0.0]);
        assert!((p[0] - 0.7).abs() < 1e-12 && (p[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_member_identity() {
        let v = build_voting_ensemble(vec![constant(0.37)], None).unwrap();
        assert_eq!(v.proba_row(&[1.0, 2.0]), constant(0.37).proba_row(&[1.0, 2.0]));
    }

    #[test]
    fn errors() {
        assert!(build_voting_ensemble(vec![], None).is_err());
        assert!(build_voting_ensemble(vec![constant(0.5)], Some(vec![1.0, 2.0])).is_err());
    }
}
