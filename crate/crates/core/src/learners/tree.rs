//! Weighted-Gini CART classification tree.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{self, Rng};

use super::{check_fit_inputs, Classifier};

/// Gains closer than this are treated as equal.
pub(crate) const GAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    Sqrt,
    Log2,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (p as f64).log2().floor() as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, p.max(1))
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" | "auto" | "none" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            _ => s
                .parse()
                .map(MaxFeatures::Count)
                .map_err(|_| Error::invalid(format!("max_features: unknown value {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    /// Multipliers for class 0 and class 1 sample weights.
    pub class_weight: Option<[f64; 2]>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            class_weight: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Weighted class totals reaching this leaf.
        counts: [f64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    /// Unnormalised weighted impurity decrease per feature.
    pub impurity_decrease: Vec<f64>,
    pub params: TreeParams,
}

pub fn gini(w0: f64, w1: f64) -> f64 {
    let t = w0 + w1;
    if t <= 0.0 {
        return 0.0;
    }
    let (a, b) = (w0 / t, w1 / t);
    1.0 - a * a - b * b
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// True when `c` should replace `best` (higher gain, then lower feature,
/// then lower threshold).
pub(crate) fn better(gain: f64, feature: usize, threshold: f64, best: Option<(f64, usize, f64)>) -> bool {
    match best {
        None => true,
        Some((g, f, t)) => {
            if gain > g + GAIN_TOL {
                true
            } else if gain < g - GAIN_TOL {
                false
            } else {
                (feature, threshold) < (f, t)
            }
        }
    }
}

/// Per-row data shared by the recursive builder.
pub(crate) struct FitData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [u8],
    pub w: &'a [f64],
    /// Row multiplicity (bootstrap draws). Counts toward sample limits.
    pub mult: &'a [u32],
}

struct Builder<'a> {
    d: FitData<'a>,
    params: &'a TreeParams,
    k_features: usize,
    rng: Rng,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

impl Builder<'_> {
    fn totals(&self, rows: &[usize]) -> ([f64; 2], usize) {
        let mut c = [0.0; 2];
        let mut n = 0usize;
        for &i in rows {
            c[self.d.y[i] as usize] += self.d.w[i];
            n += self.d.mult[i] as usize;
        }
        (c, n)
    }

    fn best_on_feature(&self, rows: &mut [usize], f: usize, counts: [f64; 2], n: usize) -> Option<Candidate> {
        let x = self.d.x;
        rows.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let parent = (counts[0] + counts[1]) * gini(counts[0], counts[1]);
        let mut left = [0.0; 2];
        let mut n_left = 0usize;
        let mut best: Option<Candidate> = None;
        let min_leaf = self.params.min_samples_leaf.max(1);
        for k in 0..rows.len() - 1 {
            let i = rows[k];
            left[self.d.y[i] as usize] += self.d.w[i];
            n_left += self.d.mult[i] as usize;
            let (v, next) = (x.get(i, f), x.get(rows[k + 1], f));
            if next <= v {
                continue;
            }
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let wl = left[0] + left[1];
            let wr = right[0] + right[1];
            if wl <= 0.0 || wr <= 0.0 {
                continue;
            }
            let gain = parent - wl * gini(left[0], left[1]) - wr * gini(right[0], right[1]);
            let threshold = v + (next - v) / 2.0;
            let threshold = if threshold >= next { v } else { threshold };
            if better(gain, f, threshold, best.map(|b| (b.gain, b.feature, b.threshold))) {
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
        best
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let (counts, n) = self.totals(rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] <= 0.0 || counts[1] <= 0.0;
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        if pure || !depth_ok || n < self.params.min_samples_split.max(2) {
            return id;
        }
        let p = self.d.x.n_cols();
        let mut order: Vec<usize> = (0..p).collect();
        if self.k_features < p {
            order.shuffle(&mut self.rng);
        }
        let mut best: Option<Candidate> = None;
        let mut visited = 0usize;
        for &f in &order {
            if visited >= self.k_features {
                break;
            }
            let first = self.d.x.get(rows[0], f);
            if rows.iter().all(|&i| self.d.x.get(i, f) == first) {
                continue;
            }
            visited += 1;
            if let Some(c) = self.best_on_feature(rows, f, counts, n) {
                if better(c.gain, c.feature, c.threshold, best.map(|b| (b.gain, b.feature, b.threshold))) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else { return id };
        let x = self.d.x;
        rows.sort_by(|&a, &b| {
            let (va, vb) = (x.get(a, split.feature), x.get(b, split.feature));
            (va > split.threshold).cmp(&(vb > split.threshold)).then(a.cmp(&b))
        });
        let cut = rows.partition_point(|&i| x.get(i, split.feature) <= split.threshold);
        self.importance[split.feature] += split.gain.max(0.0);
        let (l, r) = rows.split_at_mut(cut);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            counts,
        };
        id
    }
}

impl DecisionTreeModel {
    pub(crate) fn fit_rows(d: FitData<'_>, rows: &mut [usize], params: &TreeParams, rng: Rng) -> Self {
        let p = d.x.n_cols();
        let mut b = Builder {
            k_features: params.max_features.resolve(p),
            d,
            params,
            rng,
            nodes: Vec::new(),
            importance: vec![0.0; p],
        };
        b.build(rows, 0);
        DecisionTreeModel {
            nodes: b.nodes,
            n_features: p,
            impurity_decrease: b.importance,
            params: params.clone(),
        }
    }

    pub fn leaf_counts(&self, row: &[f64]) -> [f64; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

impl Classifier for DecisionTreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        let c = self.leaf_counts(row);
        let t = c[0] + c[1];
        if t <= 0.0 {
            return [0.5, 0.5];
        }
        [c[0] / t, c[1] / t]
    }
}

/// Effective weights: sample weight times class weight.
pub(crate) fn effective_weights(y: &[u8], w: Option<&[f64]>, class_weight: Option<[f64; 2]>) -> Vec<f64> {
    let cw = class_weight.unwrap_or([1.0, 1.0]);
    y.iter()
        .enumerate()
        .map(|(i, &c)| w.map_or(1.0, |w| w[i]) * cw[c as usize])
        .collect()
}

pub fn train_decision_tree(x: &Matrix, y: &[u8], w: Option<&[f64]>, params: &TreeParams) -> Result<DecisionTreeModel> {
    check_fit_inputs(x, y, w)?;
    let w = effective_weights(y, w, params.class_weight);
    let mult = vec![1u32; y.len()];
    let mut rows: Vec<usize> = (0..y.len()).filter(|&i| w[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::data("all sample weights are zero"));
    }
    let d = FitData {
        x,
        y,
        w: &w,
        mult: &mult,
    };
    Ok(DecisionTreeModel::fit_rows(d, &mut rows, params, rng::seeded(params.seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Matrix, Vec<u8>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        (x, vec![0, 1, 1, 0])
    }

    #[test]
    fn gini_half() {
        assert_eq!(gini(50.0, 50.0), 0.5);
        assert_eq!(gini(10.0, 0.0), 0.0);
    }

    #[test]
    fn pure_input_single_leaf() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let t = train_decision_tree(&x, &[1, 1, 1], None, &TreeParams::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.proba_row(&[9.0]), [0.0, 1.0]);
    }

    #[test]
    fn xor_learned_at_depth_two() {
        let (x, y) = xor();
        let params = TreeParams {
            max_depth: Some(2),
            ..Default::default()
        };
        let t = train_decision_tree(&x, &y, None, &params).unwrap();
        for (r, &label) in y.iter().enumerate() {
            let p = t.proba_row(x.row(r));
            assert_eq!(p[label as usize], 1.0);
        }
    }

    #[test]
    fn midpoint_threshold_and_tie_break() {
        // Both features separate perfectly; feature 0 wins the tie.
        let x = Matrix::from_rows(&[[0.0, 10.0], [1.0, 11.0], [3.0, 20.0], [4.0, 21.0]]).unwrap();
        let t = train_decision_tree(&x, &[0, 0, 1, 1], None, &TreeParams::default()).unwrap();
        match &t.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 2.0);
            }
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn class_weight_moves_leaf() {
        let x = Matrix::from_rows(&[[0.0], [0.0], [0.0]]).unwrap();
        let y = [0, 1, 1];
        let plain = train_decision_tree(&x, &y, None, &TreeParams::default()).unwrap();
        assert!(plain.proba_row(&[0.0])[1] > 0.5);
        let params = TreeParams {
            class_weight: Some([5.0, 0.09]),
            ..Default::default()
        };
        let weighted = train_decision_tree(&x, &y, None, &params).unwrap();
        let p = weighted.proba_row(&[0.0]);
        assert!((p[0] - 5.0 / 5.18).abs() < 1e-12);
    }

    #[test]
    fn max_depth_respected() {
        let x = Matrix::from_rows(&(0..64).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<u8> = (0..64).map(|i| (i % 2) as u8).collect();
        let params = TreeParams {
            max_depth: Some(3),
            ..Default::default()
        };
        assert_eq!(train_decision_tree(&x, &y, None, &params).unwrap().depth(), 3);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x = Matrix::from_rows(&(0..10).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
        let y = [0, 1, 0, 0, 0, 0, 0, 0, 0, 0];
        let params = TreeParams {
            min_samples_leaf: 3,
            ..Default::default()
        };
        let t = train_decision_tree(&x, &y, None, &params).unwrap();
        for n in &t.nodes {
            if let Node::Leaf { counts } = n {
                assert!(counts[0] + counts[1] >= 3.0);
            }
        }
    }
}
