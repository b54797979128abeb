//! Confusion counts, per-class and macro scores, ROC/AUC, paired t-tests
//! and the mean ± std summary table.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::learners::label_of;
use crate::tabular::CONTENT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio((self.tp + self.tn) as f64, self.total() as f64)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    /// `2TP / (2TP + FP + FN)`
    pub fn f1(&self) -> f64 {
        ratio(2.0 * self.tp as f64, (2 * self.tp + self.fp + self.fn_) as f64)
    }

    /// The same counts seen with the other class as positive.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn scores(&self) -> ClassScores {
        ClassScores {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8], positive: u8) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == positive, p == positive) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MacroScores {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let (a, b) = (cm.scores(), cm.swapped().scores());
        MacroScores {
            precision: (a.precision + b.precision) / 2.0,
            recall: (a.recall + b.recall) / 2.0,
            f1: (a.f1 + b.f1) / 2.0,
        }
    }
}

pub fn macro_scores(y_true: &[u8], y_pred: &[u8]) -> Result<MacroScores> {
    Ok(MacroScores::from_confusion(&confusion(y_true, y_pred, CONTENT)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (FPR, TPR) from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC over distinct score thresholds, highest first; `scores` rank class 1.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<RocCurve> {
    if y_true.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            actual: scores.len(),
        });
    }
    let pos = y_true.iter().filter(|&&c| c == 1).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::data("ROC needs both classes in y_true"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::data("ROC scores contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if y_true[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Two-sided paired t-test on `a − b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 || !var.is_finite() {
        return Err(Error::Degenerate("paired differences have zero variance".into()));
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let df = (n - 1) as f64;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Degenerate(e.to_string()))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest { t, df, p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    /// Indexed by class: Discontent, Content.
    pub per_class: [ClassScores; 2],
    pub macro_avg: MacroScores,
    pub roc: RocCurve,
}

/// The five headline numbers, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub roc: f64,
}

impl ReportRow {
    pub const COLUMNS: [&'static str; 5] = ["Accuracy", "F1", "Precision", "Recall", "ROC"];

    pub fn values(&self) -> [f64; 5] {
        [self.accuracy, self.f1, self.precision, self.recall, self.roc]
    }
}

impl EvaluationReport {
    pub fn row(&self) -> ReportRow {
        ReportRow {
            accuracy: self.accuracy,
            f1: self.macro_avg.f1,
            precision: self.macro_avg.precision,
            recall: self.macro_avg.recall,
            roc: self.roc.auc,
        }
    }
}

pub fn evaluate(y_true: &[u8], proba: &[[f64; 2]]) -> Result<EvaluationReport> {
    let pred: Vec<u8> = proba.iter().map(|p| label_of(*p)).collect();
    let cm = confusion(y_true, &pred, CONTENT)?;
    let scores: Vec<f64> = proba.iter().map(|p| p[1]).collect();
    Ok(EvaluationReport {
        confusion: cm,
        accuracy: cm.accuracy(),
        per_class: [cm.swapped().scores(), cm.scores()],
        macro_avg: MacroScores::from_confusion(&cm),
        roc: roc_auc(y_true, &scores)?,
    })
}

/// Score names accepted by tuning and selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    #[default]
    MacroF1,
    MacroPrecision,
    MacroRecall,
    RocAuc,
}

impl Metric {
    pub fn score(self, y_true: &[u8], proba: &[[f64; 2]]) -> Result<f64> {
        let pred: Vec<u8> = proba.iter().map(|p| label_of(*p)).collect();
        let cm = confusion(y_true, &pred, CONTENT)?;
        Ok(match self {
            Metric::Accuracy => cm.accuracy(),
            Metric::MacroF1 => MacroScores::from_confusion(&cm).f1,
            Metric::MacroPrecision => MacroScores::from_confusion(&cm).precision,
            Metric::MacroRecall => MacroScores::from_confusion(&cm).recall,
            Metric::RocAuc => {
                let s: Vec<f64> = proba.iter().map(|p| p[1]).collect();
                roc_auc(y_true, &s)?.auc
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub model: String,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// FP/FN counts per model on a shared test split.
pub fn error_breakdown(predictions: &[(String, Vec<u8>)], y_true: &[u8]) -> Result<Vec<ErrorRow>> {
    predictions
        .iter()
        .map(|(name, pred)| {
            let cm = confusion(y_true, pred, CONTENT)?;
            Ok(ErrorRow {
                model: name.clone(),
                false_positives: cm.fp,
                false_negatives: cm.fn_,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(v: &[f64]) -> MeanStd {
        let n = v.len() as f64;
        // offsets from the first run keep identical runs exact
        let mean = v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / n;
        let std = if v.len() < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }

    /// Percent with two decimals: "93.80 ± 0.10".
    pub fn percent(&self) -> String {
        format!("{:.2} ± {:.2}", 100.0 * self.mean, 100.0 * self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub runs: usize,
    /// Same order as `ReportRow::COLUMNS`.
    pub metrics: [MeanStd; 5],
}

pub fn mean_std_report(runs: &[(String, Vec<ReportRow>)]) -> Result<Vec<SummaryRow>> {
    runs.iter()
        .map(|(model, rows)| {
            if rows.is_empty() {
                return Err(Error::invalid(format!("{model}: no runs to summarise")));
            }
            let metrics = std::array::from_fn(|j| {
                let col: Vec<f64> = rows.iter().map(|r| r.values()[j]).collect();
                MeanStd::of(&col)
            });
            Ok(SummaryRow {
                model: model.clone(),
                runs: rows.len(),
                metrics,
            })
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["Model".to_string()];
    header.extend(ReportRow::COLUMNS.iter().map(|c| format!("{c} (%)")));
    out.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    for r in rows {
        let mut rec = vec![r.model.clone()];
        rec.extend(r.metrics.iter().map(MeanStd::percent));
        out.write_record(&rec).map_err(|e| Error::Csv(e.to_string()))?;
    }
    out.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// Plain-text table for terminals.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:width$}", "Model");
    for c in ReportRow::COLUMNS {
        s.push_str(&format!("  {:>16}", format!("{c} (%)")));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{:width$}", r.model));
        for m in &r.metrics {
            s.push_str(&format!("  {:>16}", m.percent()));
        }
        s.push('\n');
    }
    s
}
