//! Model specifications keyed by the usual hyperparameter names
//! (`n_estimators`, `learning_rate`, `num_leaves`, ...).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    GradientBoosting,
    DecisionTree,
    AdaBoost,
    XgBoost,
    Svc,
    Lgb,
    NaiveBayes,
    LogisticRegression,
    Ensemble,
    Baseline,
}

impl ModelKind {
    /// The evaluated models in report order.
    pub const REPORTED: [ModelKind; 10] = [
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
        ModelKind::DecisionTree,
        ModelKind::AdaBoost,
        ModelKind::XgBoost,
        ModelKind::Svc,
        ModelKind::Lgb,
        ModelKind::NaiveBayes,
        ModelKind::LogisticRegression,
        ModelKind::Ensemble,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "Random Forest",
            ModelKind::GradientBoosting => "Gradient Boosting",
            ModelKind::DecisionTree => "Decision Tree",
            ModelKind::AdaBoost => "AdaBoost",
            ModelKind::XgBoost => "XGBoost",
            ModelKind::Svc => "SVC",
            ModelKind::Lgb => "LGB",
            ModelKind::NaiveBayes => "Naive Bayes",
            ModelKind::LogisticRegression => "Logistic Regression",
            ModelKind::Ensemble => "Ensemble",
            ModelKind::Baseline => "Baseline",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoosting => "gradient_boosting",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::AdaBoost => "ada_boost",
            ModelKind::XgBoost => "xg_boost",
            ModelKind::Svc => "svc",
            ModelKind::Lgb => "lgb",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::Ensemble => "ensemble",
            ModelKind::Baseline => "baseline",
        }
    }

    /// Whether fitting draws random numbers.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            ModelKind::RandomForest | ModelKind::XgBoost | ModelKind::Lgb | ModelKind::Ensemble
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let kind = match norm.as_str() {
            "randomforest" | "rf" => ModelKind::RandomForest,
            "gradientboosting" | "gb" => ModelKind::GradientBoosting,
            "decisiontree" | "dt" => ModelKind::DecisionTree,
            "adaboost" => ModelKind::AdaBoost,
            "xgboost" | "xgb" => ModelKind::XgBoost,
            "svc" | "svm" => ModelKind::Svc,
            "lgb" | "lightgbm" => ModelKind::Lgb,
            "naivebayes" | "nb" => ModelKind::NaiveBayes,
            "logisticregression" | "lr" => ModelKind::LogisticRegression,
            "ensemble" | "voting" => ModelKind::Ensemble,
            "baseline" | "prior" => ModelKind::Baseline,
            _ => return Err(Error::invalid(format!("unknown model {s:?}"))),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    /// Ensemble members; empty means the default trio.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

fn map(pairs: Value) -> BTreeMap<String, Value> {
    match pairs {
        Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            params: BTreeMap::new(),
            members: Vec::new(),
            weights: None,
        }
    }

    pub fn with(mut self, name: &str, value: Value) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// Hyperparameters reported as best for each model.
    pub fn paper(kind: ModelKind) -> Self {
        let params = match kind {
            ModelKind::RandomForest => json!({
                "n_estimators": 600, "min_samples_split": 2, "min_samples_leaf": 1,
                "max_features": "log2", "max_depth": 780, "criterion": "gini"
            }),
            ModelKind::GradientBoosting => json!({
                "n_estimators": 500, "learning_rate": 1.0, "max_depth": 1
            }),
            ModelKind::AdaBoost => json!({
                "n_estimators": 600, "random_state": 21, "learning_rate": 1.0
            }),
            ModelKind::LogisticRegression => json!({"solver": "liblinear", "penalty": "l2"}),
            ModelKind::Lgb => json!({
                "boosting_type": "gbdt", "objective": "binary", "metric": "binary_logloss",
                "num_leaves": 31, "learning_rate": 0.05, "feature_fraction": 0.9
            }),
            _ => json!({}),
        };
        let mut spec = ModelSpec {
            kind,
            params: map(params),
            members: Vec::new(),
            weights: None,
        };
        if kind == ModelKind::Ensemble {
            let rf = ModelSpec::paper(ModelKind::RandomForest).with("class_weight", json!({"0": 5.0, "1": 0.09}));
            spec.members = vec![
                rf,
                ModelSpec::paper(ModelKind::GradientBoosting),
                ModelSpec::paper(ModelKind::Lgb),
            ];
        }
        spec
    }
}

struct Reader<'a> {
    kind: ModelKind,
    params: &'a BTreeMap<String, Value>,
    used: BTreeSet<&'a str>,
}

impl<'a> Reader<'a> {
    fn new(kind: ModelKind, params: &'a BTreeMap<String, Value>) -> Self {
        Reader {
            kind,
            params,
            used: BTreeSet::new(),
        }
    }

    fn err(&self, name: &str, what: &str) -> Error {
        Error::invalid(format!("{}: {name} {what}", self.kind.key()))
    }

    fn raw(&mut self, name: &'a str) -> Option<&'a Value> {
        let v = self.params.get(name)?;
        self.used.insert(name);
        Some(v)
    }

    fn f64(&mut self, name: &'a str, default: f64) -> Result<f64> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| self.err(name, "must be a number")),
        }
    }

    fn usize(&mut self, name: &'a str, default: usize) -> Result<usize> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
                .map(|n| n as usize)
                .ok_or_else(|| self.err(name, "must be a non-negative integer")),
        }
    }

    /// Absent, null, negative or "none" mean unlimited.
    fn depth(&mut self, name: &'a str, default: Option<usize>) -> Result<Option<usize>> {
        match self.raw(name) {
            None => Ok(default),
            Some(Value::Null) => Ok(None),
            Some(Value::String(s)) if s.eq_ignore_ascii_case("none") => Ok(None),
            Some(v) => match v.as_i64() {
                Some(d) if d < 0 => Ok(None),
                Some(d) => Ok(Some(d as usize)),
                None => Err(self.err(name, "must be an integer or null")),
            },
        }
    }

    fn str(&mut self, name: &'a str) -> Result<Option<&'a str>> {
        match self.raw(name) {
            None => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| self.err(name, "must be a string")),
        }
    }

    fn bool(&mut self, name: &'a str, default: bool) -> Result<bool> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| self.err(name, "must be a boolean")),
        }
    }

    /// Only `allowed` values are accepted; the name is otherwise inert.
    fn fixed(&mut self, name: &'a str, allowed: &[&str]) -> Result<()> {
        if let Some(s) = self.str(name)? {
            if !allowed.contains(&s) {
                return Err(self.err(name, &format!("{s:?} is not supported (expected one of {allowed:?})")));
            }
        }
        Ok(())
    }

    fn class_weight(&mut self) -> Result<Option<[f64; 2]>> {
        let Some(v) = self.raw("class_weight") else { return Ok(None) };
        let pick = |k: &str, i: usize| -> Option<f64> {
            match v {
                Value::Object(m) => m.get(k).and_then(Value::as_f64),
                Value::Array(a) => a.get(i).and_then(Value::as_f64),
                _ => None,
            }
        };
        match (pick("0", 0), pick("1", 1)) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Ok(Some([a, b])),
            _ => Err(self.err("class_weight", "must give positive weights for classes 0 and 1")),
        }
    }

    fn seed(&mut self, run_seed: u64) -> Result<u64> {
        match self.raw("random_state") {
            None | Some(Value::Null) => Ok(run_seed),
            Some(v) => v.as_u64().ok_or_else(|| self.err("random_state", "must be a non-negative integer")),
        }
    }

    fn finish(self) -> Result<()> {
        let unknown: Vec<&String> = self
            .params
            .keys()
            .filter(|k| !self.used.contains(k.as_str()))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!("{}: unknown hyperparameters {unknown:?}", self.kind.key())))
        }
    }
}

fn tree_params(r: &mut Reader<'_>, default_features: MaxFeatures, seed: u64) -> Result<TreeParams> {
    r.fixed("criterion", &["gini"])?;
    let max_features = match r.raw("max_features") {
        None | Some(Value::Null) => default_features,
        Some(Value::String(s)) => MaxFeatures::parse(s)?,
        Some(v) => MaxFeatures::Count(v.as_u64().ok_or_else(|| r.err("max_features", "must be sqrt, log2, all or a count"))? as usize),
    };
    Ok(TreeParams {
        max_depth: r.depth("max_depth", None)?,
        min_samples_split: r.usize("min_samples_split", 2)?,
        min_samples_leaf: r.usize("min_samples_leaf", 1)?,
        max_features,
        class_weight: r.class_weight()?,
        seed,
    })
}

/// Fit the model described by `spec`. `seed` is used unless the spec
/// pins `random_state`.
pub fn fit_model(spec: &ModelSpec, x: &Matrix, y: &[u8], w: Option<&[f64]>, seed: u64) -> Result<ClassifierModel> {
    let mut r = Reader::new(spec.kind, &spec.params);
    let seed = r.seed(seed)?;
    let model = match spec.kind {
        ModelKind::DecisionTree => {
            let p = tree_params(&mut r, MaxFeatures::All, seed)?;
            r.finish()?;
            ClassifierModel::DecisionTree(train_decision_tree(x, y, w, &p)?)
        }
        ModelKind::RandomForest => {
            let tree = tree_params(&mut r, MaxFeatures::Sqrt, seed)?;
            let p = ForestParams {
                n_estimators: r.usize("n_estimators", 100)?,
                bootstrap: r.bool("bootstrap", true)?,
                tree,
                seed,
            };
            r.finish()?;
            ClassifierModel::RandomForest(train_random_forest(x, y, w, &p)?)
        }
        ModelKind::GradientBoosting => {
            let p = BoostParams {
                n_estimators: r.usize("n_estimators", 100)?,
                learning_rate: r.f64("learning_rate", 0.1)?,
                growth: Growth::Depthwise {
                    max_depth: r.usize("max_depth", 3)?,
                },
                feature_fraction: r.f64("subsample_features", 1.0)?,
                min_samples_leaf: r.usize("min_samples_leaf", 1)?,
                min_child_weight: 0.0,
                min_split_gain: 0.0,
                seed,
            };
            r.finish()?;
            ClassifierModel::Boosted(train_gradient_boosting(x, y, w, &p)?)
        }
        ModelKind::XgBoost => {
            r.fixed("booster", &["gbtree"])?;
            let p = BoostParams {
                n_estimators: r.usize("n_estimators", 100)?,
                learning_rate: r.f64("learning_rate", 0.3)?,
                growth: Growth::Depthwise {
                    max_depth: r.usize("max_depth", 6)?,
                },
                feature_fraction: r.f64("colsample_bytree", 1.0)?,
                min_samples_leaf: 1,
                min_child_weight: r.f64("min_child_weight", 1.0)?,
                min_split_gain: r.f64("gamma", 0.0)?,
                seed,
            };
            r.finish()?;
            ClassifierModel::Boosted(train_gradient_boosting(x, y, w, &p)?)
        }
        ModelKind::Lgb => {
            r.fixed("boosting_type", &["gbdt"])?;
            r.fixed("objective", &["binary"])?;
            r.fixed("metric", &["binary_logloss"])?;
            let p = BoostParams {
                n_estimators: r.usize("n_estimators", 100)?,
                learning_rate: r.f64("learning_rate", 0.1)?,
                growth: Growth::Leafwise {
                    num_leaves: r.usize("num_leaves", 31)?,
                    max_depth: r.depth("max_depth", None)?,
                },
                feature_fraction: r.f64("feature_fraction", 1.0)?,
                min_samples_leaf: r.usize("min_child_samples", 20)?,
                min_child_weight: r.f64("min_child_weight", 1e-3)?,
                min_split_gain: r.f64("min_split_gain", 0.0)?,
                seed,
            };
            r.finish()?;
            ClassifierModel::Boosted(train_gradient_boosting(x, y, w, &p)?)
        }
        ModelKind::AdaBoost => {
            r.fixed("base_estimator", &["clf", "stump", "decision_tree"])?;
            let p = AdaBoostParams {
                n_estimators: r.usize("n_estimators", 50)?,
                learning_rate: r.f64("learning_rate", 1.0)?,
                max_depth: r.usize("max_depth", 1)?,
                seed,
            };
            r.finish()?;
            ClassifierModel::AdaBoost(train_adaboost(x, y, w, &p)?)
        }
        ModelKind::NaiveBayes => {
            r.finish()?;
            ClassifierModel::NaiveBayes(train_naive_bayes(x, y, w)?)
        }
        ModelKind::LogisticRegression => {
            r.fixed("solver", &["liblinear", "lbfgs", "gd"])?;
            r.fixed("penalty", &["l2"])?;
            let p = LogisticParams {
                c: r.f64("C", 1.0)?,
                max_iter: r.usize("max_iter", 10_000)?,
                tol: r.f64("tol", 1e-6)?,
            };
            r.finish()?;
            ClassifierModel::Logistic(train_logistic_regression(x, y, w, &p)?)
        }
        ModelKind::Svc => {
            r.fixed("kernel", &["linear"])?;
            let p = SvmParams {
                c: r.f64("C", 1.0)?,
                epochs: r.usize("epochs", 1000)?,
                eta0: r.f64("eta0", 1.0)?,
            };
            r.finish()?;
            ClassifierModel::Svm(train_linear_svm(x, y, w, &p)?)
        }
        ModelKind::Baseline => {
            r.finish()?;
            check_fit_inputs(x, y, w)?;
            ClassifierModel::Prior(PriorModel::fit(y, x.n_cols())?)
        }
        ModelKind::Ensemble => {
            r.finish()?;
            let default;
            let members = if spec.members.is_empty() {
                default = ModelSpec::paper(ModelKind::Ensemble).members;
                &default
            } else {
                &spec.members
            };
            let fitted = members
                .iter()
                .enumerate()
                .map(|(i, m)| fit_model(m, x, y, w, seed.wrapping_add(i as u64)))
                .collect::<Result<Vec<_>>>()?;
            ClassifierModel::Voting(build_voting_ensemble(fitted, spec.weights.clone())?)
        }
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Vec<u8>) {
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [(i % 8) as f64, (i % 5) as f64]).collect();
        let y = rows.iter().map(|r| u8::from(r[0] > 3.0)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn names_round_trip() {
        for k in ModelKind::REPORTED {
            assert_eq!(k.display_name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(k.key().parse::<ModelKind>().unwrap(), k);
        }
    }

    #[test]
    fn unknown_hyperparameter_rejected() {
        let (x, y) = data();
        let spec = ModelSpec::new(ModelKind::GradientBoosting).with("n_estimator", json!(5));
        assert!(fit_model(&spec, &x, &y, None, 0).is_err());
    }

    #[test]
    fn unsupported_booster_rejected() {
        let (x, y) = data();
        let spec = ModelSpec::new(ModelKind::XgBoost).with("booster", json!("dart"));
        assert!(fit_model(&spec, &x, &y, None, 0).is_err());
    }

    #[test]
    fn class_weight_forms() {
        let (x, y) = data();
        for cw in [json!({"0": 5, "1": 0.09}), json!([5, 0.09])] {
            let spec = ModelSpec::new(ModelKind::RandomForest)
                .with("n_estimators", json!(3))
                .with("class_weight", cw);
            match fit_model(&spec, &x, &y, None, 1).unwrap() {
                ClassifierModel::RandomForest(f) => assert_eq!(f.params.tree.class_weight, Some([5.0, 0.09])),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn paper_presets_parse() {
        let (x, y) = data();
        for k in [ModelKind::GradientBoosting, ModelKind::AdaBoost, ModelKind::LogisticRegression, ModelKind::Lgb] {
            fit_model(&ModelSpec::paper(k), &x, &y, None, 0).unwrap();
        }
        let rf = ModelSpec::paper(ModelKind::RandomForest).with("n_estimators", json!(4));
        match fit_model(&rf, &x, &y, None, 0).unwrap() {
            ClassifierModel::RandomForest(f) => {
                assert_eq!(f.params.tree.max_depth, Some(780));
                assert_eq!(f.params.tree.max_features, MaxFeatures::Log2);
            }
            _ => unreachable!(),
        }
        let ens = ModelSpec::paper(ModelKind::Ensemble);
        let kinds: Vec<ModelKind> = ens.members.iter().map(|m| m.kind).collect();
        assert_eq!(kinds, [ModelKind::RandomForest, ModelKind::GradientBoosting, ModelKind::Lgb]);
    }
}
