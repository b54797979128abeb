//! Stratified k-fold cross-validation with grid and randomised search.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::learners::{fit_model, ModelSpec};
use crate::metrics::{MeanStd, Metric};
use crate::rng;
use crate::tabular::Dataset;

/// Test-row indices per fold. Each class is shuffled separately and dealt
/// round-robin so every fold gets its share of both classes.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_k(labels.len(), k)?;
    let mut rng = rng::seeded(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(i);
            next += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Plain shuffled folds, ignoring labels.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_k(n, k)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let mut folds = vec![Vec::new(); k];
    for (j, i) in idx.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} rows cannot fill {k} folds")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub metric: Metric,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 5,
            metric: Metric::MacroF1,
            seed: 42,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean: f64,
    pub std: f64,
    pub scores: Vec<f64>,
}

pub fn folds_for(ds: &Dataset, opts: &CvOptions) -> Result<Vec<Vec<usize>>> {
    let labels = ds.require_labels()?;
    if opts.stratified {
        stratified_kfold(labels, opts.k, opts.seed)
    } else {
        kfold(labels.len(), opts.k, opts.seed)
    }
}

pub fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mark = vec![true; n];
    test.iter().for_each(|&i| mark[i] = false);
    (0..n).filter(|&i| mark[i]).collect()
}

pub fn cross_validate(spec: &ModelSpec, ds: &Dataset, opts: &CvOptions) -> Result<CvResult> {
    let folds = folds_for(ds, opts)?;
    let scores = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let train = ds.select_rows(&complement(ds.n_rows(), test));
            let test = ds.select_rows(test);
            let labels = train.require_labels()?;
            if labels.iter().all(|&c| c == labels[0]) {
                return Err(Error::data(format!("fold {f}: training part has a single class")));
            }
            let model = fit_model(spec, train.values(), labels, None, opts.seed)?;
            let proba = model.predict_proba(test.values())?;
            opts.metric
                .score(test.require_labels()?, &proba)
                .map_err(|e| Error::data(format!("fold {f}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let ms = MeanStd::of(&scores);
    Ok(CvResult {
        mean: ms.mean,
        std: ms.std,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Dist {
    Choice { values: Vec<Value> },
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    IntRange { low: i64, high: i64 },
}

impl Dist {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Dist::Choice { values } => !values.is_empty(),
            Dist::Uniform { low, high } => low <= high,
            Dist::LogUniform { low, high } => *low > 0.0 && low <= high,
            Dist::IntRange { low, high } => low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("search range for {name} is empty")))
        }
    }

    fn sample(&self, rng: &mut rng::Rng) -> Value {
        match self {
            Dist::Choice { values } => values[rng.random_range(0..values.len())].clone(),
            Dist::Uniform { low, high } => json!(low + rng.random::<f64>() * (high - low)),
            Dist::LogUniform { low, high } => {
                json!((low.ln() + rng.random::<f64>() * (high.ln() - low.ln())).exp())
            }
            Dist::IntRange { low, high } => json!(rng.random_range(*low..=*high)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    #[serde(flatten)]
    pub dist: Dist,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSpace {
    pub axes: Vec<Axis>,
}

pub type Params = BTreeMap<String, Value>;

fn steps(low: f64, step: f64, n: usize) -> Vec<Value> {
    (0..n)
        .map(|i| json!(((low + step * i as f64) * 1e6).round() / 1e6))
        .collect()
}

impl ParamSpace {
    pub fn choice(mut self, name: &str, values: Vec<Value>) -> Self {
        self.axes.push(Axis {
            name: name.into(),
            dist: Dist::Choice { values },
        });
        self
    }

    pub fn with(mut self, name: &str, dist: Dist) -> Self {
        self.axes.push(Axis {
            name: name.into(),
            dist,
        });
        self
    }

    /// The tuned ranges for the depthwise booster. Only tree boosters are
    /// offered.
    pub fn xgboost_default() -> Self {
        ParamSpace::default()
            .choice("learning_rate", steps(0.05, 0.05, 6))
            .choice("max_depth", (3..=15).map(|d| json!(d)).collect())
            .choice("min_child_weight", vec![json!(1), json!(3), json!(5), json!(7)])
            .choice("gamma", steps(0.0, 0.1, 5))
            .choice("colsample_bytree", steps(0.3, 0.1, 5))
            .choice("booster", vec![json!("gbtree")])
    }

    pub fn grid_size(&self) -> usize {
        self.axes
            .iter()
            .map(|a| match &a.dist {
                Dist::Choice { values } => values.len(),
                _ => 0,
            })
            .product()
    }

    /// Cartesian product in declaration order; the last axis varies fastest.
    pub fn grid(&self) -> Result<Vec<Params>> {
        if self.axes.is_empty() {
            return Err(Error::invalid("empty parameter grid"));
        }
        let mut out = vec![Params::new()];
        for a in &self.axes {
            a.dist.validate(&a.name)?;
            let Dist::Choice { values } = &a.dist else {
                return Err(Error::invalid(format!("{} is a range; grid search needs value lists", a.name)));
            };
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(a.name.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        Ok(out)
    }

    pub fn sample(&self, n_iter: usize, seed: u64) -> Result<Vec<Params>> {
        if n_iter == 0 {
            return Err(Error::invalid("n_iter must be at least 1"));
        }
        for a in &self.axes {
            a.dist.validate(&a.name)?;
        }
        let mut rng = rng::seeded(seed);
        Ok((0..n_iter)
            .map(|_| {
                self.axes
                    .iter()
                    .map(|a| (a.name.clone(), a.dist.sample(&mut rng)))
                    .collect()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: Params,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_params: Params,
    pub best_score: f64,
    pub table: Vec<CandidateScore>,
}

impl SearchResult {
    /// `base` with the winning parameters applied.
    pub fn best_spec(&self, base: &ModelSpec) -> ModelSpec {
        let mut spec = base.clone();
        spec.params.extend(self.best_params.clone());
        spec
    }
}

fn evaluate_candidates(candidates: Vec<Params>, base: &ModelSpec, ds: &Dataset, opts: &CvOptions) -> Result<SearchResult> {
    let table = candidates
        .into_par_iter()
        .map(|params| {
            let mut spec = base.clone();
            spec.params.extend(params.clone());
            let cv = cross_validate(&spec, ds, opts)?;
            Ok(CandidateScore {
                params,
                mean: cv.mean,
                std: cv.std,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, c) in table.iter().enumerate() {
        if c.mean > table[best].mean {
            best = i;
        }
    }
    Ok(SearchResult {
        best_params: table[best].params.clone(),
        best_score: table[best].mean,
        table,
    })
}

pub fn grid_search(space: &ParamSpace, base: &ModelSpec, ds: &Dataset, opts: &CvOptions) -> Result<SearchResult> {
    evaluate_candidates(space.grid()?, base, ds, opts)
}

pub fn random_search(
    space: &ParamSpace,
    n_iter: usize,
    sample_seed: u64,
    base: &ModelSpec,
    ds: &Dataset,
    opts: &CvOptions,
) -> Result<SearchResult> {
    evaluate_candidates(space.sample(n_iter, sample_seed)?, base, ds, opts)
}
