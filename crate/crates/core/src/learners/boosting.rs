//! Gradient boosting on logistic loss with regression-tree stages.
//!
//! The raw score is `init + Σ η·h_t(x)` where `init` is the training
//! log-odds and each `h_t` is fitted to the residuals `y - p`. Trees grow
//! either depth-first to a depth limit or best-first up to a leaf budget.

use log::warn;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

use super::tree::better;
use super::{check_fit_inputs, sigmoid, Classifier};

const HESS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Depthwise { max_depth: usize },
    Leafwise { num_leaves: usize, max_depth: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub growth: Growth,
    pub feature_fraction: f64,
    pub min_samples_leaf: usize,
    /// Minimum hessian sum in a child.
    pub min_child_weight: f64,
    /// A split must improve the squared-error criterion by more than this.
    pub min_split_gain: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_estimators: 100,
            learning_rate: 0.1,
            growth: Growth::Depthwise { max_depth: 3 },
            feature_fraction: 1.0,
            min_samples_leaf: 1,
            min_child_weight: 0.0,
            min_split_gain: 0.0,
            seed: 0,
        }
    }
}

impl BoostParams {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::invalid("feature_fraction must lie in (0, 1]"));
        }
        match self.growth {
            Growth::Depthwise { max_depth: 0 } => Err(Error::invalid("max_depth must be at least 1")),
            Growth::Leafwise { num_leaves, .. } if num_leaves < 2 => {
                Err(Error::invalid("num_leaves must be at least 2"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, RegNode::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsembleModel {
    pub init: f64,
    pub learning_rate: f64,
    pub stages: Vec<RegressionTree>,
    pub n_features: usize,
    /// Weighted impurity decrease per feature, summed over stages.
    pub split_gain: Vec<f64>,
    pub params: BoostParams,
}

impl BoostedEnsembleModel {
    /// Per-stage tree outputs `h_t(x)` before shrinkage.
    pub fn stage_outputs(&self, row: &[f64]) -> Vec<f64> {
        self.stages.iter().map(|t| t.predict(row)).collect()
    }

    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.init
            + self
                .stages
                .iter()
                .map(|t| self.learning_rate * t.predict(row))
                .sum::<f64>()
    }
}

impl Classifier for BoostedEnsembleModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, row: &[f64]) -> [f64; 2] {
        let p = sigmoid(self.raw_score(row));
        [1.0 - p, p]
    }
}

struct Stats<'a> {
    x: &'a Matrix,
    w: &'a [f64],
    /// w·(y − p)
    g: &'a [f64],
    /// w·p(1 − p)
    h: &'a [f64],
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Grower<'a> {
    s: Stats<'a>,
    features: Vec<usize>,
    params: &'a BoostParams,
    nodes: Vec<RegNode>,
    gain: Vec<f64>,
}

impl Grower<'_> {
    fn sums(&self, rows: &[usize]) -> (f64, f64, f64) {
        rows.iter().fold((0.0, 0.0, 0.0), |(g, w, h), &i| {
            (g + self.s.g[i], w + self.s.w[i], h + self.s.h[i])
        })
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let (g, _, h) = self.sums(rows);
        g / h.max(HESS_FLOOR)
    }

    fn best_split(&self, rows: &mut [usize]) -> Option<Split> {
        if rows.len() < 2 * self.params.min_samples_leaf.max(1) {
            return None;
        }
        let (g_all, w_all, h_all) = self.sums(rows);
        if w_all <= 0.0 {
            return None;
        }
        let parent = g_all * g_all / w_all;
        let x = self.s.x;
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<Split> = None;
        for &f in &self.features {
            rows.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            let (mut gl, mut wl, mut hl) = (0.0, 0.0, 0.0);
            for k in 0..rows.len() - 1 {
                let i = rows[k];
                gl += self.s.g[i];
                wl += self.s.w[i];
                hl += self.s.h[i];
                let (v, next) = (x.get(i, f), x.get(rows[k + 1], f));
                if next <= v || k + 1 < min_leaf || rows.len() - k - 1 < min_leaf {
                    continue;
                }
                let (gr, wr, hr) = (g_all - gl, w_all - wl, h_all - hl);
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                    continue;
                }
                let gain = gl * gl / wl + gr * gr / wr - parent;
                if gain <= self.params.min_split_gain.max(0.0) + super::tree::GAIN_TOL {
                    continue;
                }
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                if better(gain, f, threshold, best.map(|b| (b.gain, b.feature, b.threshold))) {
                    best = Some(Split {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn partition(&self, rows: &mut [usize], split: Split) -> usize {
        let x = self.s.x;
        rows.sort_by(|&a, &b| {
            let (va, vb) = (x.get(a, split.feature), x.get(b, split.feature));
            (va > split.threshold).cmp(&(vb > split.threshold)).then(a.cmp(&b))
        });
        rows.partition_point(|&i| x.get(i, split.feature) <= split.threshold)
    }

    fn depthwise(&mut self, rows: &mut [usize], depth: usize, max_depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(RegNode::Leaf {
            value: self.leaf_value(rows),
        });
        if depth >= max_depth {
            return id;
        }
        let Some(split) = self.best_split(rows) else { return id };
        self.gain[split.feature] += split.gain;
        let cut = self.partition(rows, split);
        let (l, r) = rows.split_at_mut(cut);
        let left = self.depthwise(l, depth + 1, max_depth);
        let right = self.depthwise(r, depth + 1, max_depth);
        self.nodes[id] = RegNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn open_leaf(&mut self, mut rows: Vec<usize>, depth: usize, max_depth: Option<usize>) -> Open {
        let node = self.nodes.len();
        self.nodes.push(RegNode::Leaf {
            value: self.leaf_value(&rows),
        });
        let split = if max_depth.is_none_or(|m| depth < m) {
            self.best_split(&mut rows)
        } else {
            None
        };
        Open {
            node,
            rows,
            depth,
            split,
        }
    }

    fn leafwise(&mut self, rows: Vec<usize>, num_leaves: usize, max_depth: Option<usize>) {
        let mut open = vec![self.open_leaf(rows, 0, max_depth)];
        let mut leaves = 1;
        while leaves < num_leaves {
            // Highest gain wins; ties go to the earliest created leaf.
            let pick = open
                .iter()
                .enumerate()
                .filter_map(|(i, o)| o.split.map(|s| (i, s.gain)))
                .fold(None::<(usize, f64)>, |acc, (i, g)| match acc {
                    Some((_, bg)) if g <= bg + super::tree::GAIN_TOL => acc,
                    _ => Some((i, g)),
                });
            let Some((i, _)) = pick else { break };
            let mut o = open.remove(i);
            let split = o.split.take().expect("picked leaf has a split");
            self.gain[split.feature] += split.gain;
            let cut = self.partition(&mut o.rows, split);
            let right_rows = o.rows.split_off(cut);
            let l = self.open_leaf(o.rows, o.depth + 1, max_depth);
            let r = self.open_leaf(right_rows, o.depth + 1, max_depth);
            self.nodes[o.node] = RegNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: l.node,
                right: r.node,
            };
            open.push(l);
            open.push(r);
            leaves += 1;
        }
    }
}

struct Open {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    split: Option<Split>,
}

/// Features used by stage `t`.
fn stage_features(p: usize, fraction: f64, seed: u64, t: usize) -> Vec<usize> {
    let k = ((fraction * p as f64).ceil() as usize).clamp(1, p);
    if k == p {
        return (0..p).collect();
    }
    let mut rng = rng::stream(seed, t as u64);
    let mut f = index::sample(&mut rng, p, k).into_vec();
    f.sort_unstable();
    f
}

pub fn train_gradient_boosting(x: &Matrix, y: &[u8], w: Option<&[f64]>, params: &BoostParams) -> Result<BoostedEnsembleModel> {
    check_fit_inputs(x, y, w)?;
    params.validate()?;
    let n = y.len();
    let p = x.n_cols();
    let w: Vec<f64> = w.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let total: f64 = w.iter().sum();
    let pos: f64 = y.iter().zip(&w).filter(|(c, _)| **c == 1).map(|(_, w)| w).sum();
    let rate = (pos / total).clamp(1e-12, 1.0 - 1e-12);
    let init = (rate / (1.0 - rate)).ln();
    let mut model = BoostedEnsembleModel {
        init,
        learning_rate: params.learning_rate,
        stages: Vec::with_capacity(params.n_estimators),
        n_features: p,
        split_gain: vec![0.0; p],
        params: params.clone(),
    };
    if pos <= 0.0 || pos >= total {
        warn!("boosting on a single class; returning a constant model");
        return Ok(model);
    }
    let mut raw = vec![init; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for t in 0..params.n_estimators {
        for i in 0..n {
            let pr = sigmoid(raw[i]);
            g[i] = w[i] * (f64::from(y[i]) - pr);
            h[i] = w[i] * pr * (1.0 - pr);
        }
        let mut grower = Grower {
            s: Stats {
                x,
                w: &w,
                g: &g,
                h: &h,
            },
            features: stage_features(p, params.feature_fraction, params.seed, t),
            params,
            nodes: Vec::new(),
            gain: vec![0.0; p],
        };
        let rows: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
        match params.growth {
            Growth::Depthwise { max_depth } => {
                let mut rows = rows;
                grower.depthwise(&mut rows, 0, max_depth);
            }
            Growth::Leafwise {
                num_leaves,
                max_depth,
            } => grower.leafwise(rows, num_leaves, max_depth),
        }
        let tree = RegressionTree {
            nodes: grower.nodes,
        };
        for (acc, gi) in model.split_gain.iter_mut().zip(&grower.gain) {
            *acc += gi;
        }
        for (i, r) in raw.iter_mut().enumerate() {
            *r += params.learning_rate * tree.predict(x.row(i));
        }
        model.stages.push(tree);
    }
    Ok(model)
}
