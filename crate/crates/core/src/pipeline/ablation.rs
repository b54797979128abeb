use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MeanStd;
use crate::resample::ResampleMode;

use super::config::{PipelineConfig, SelectionMode};
use super::prepare::prepare;
use super::train::fit_roster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub accuracy: Option<MeanStd>,
    pub f1: Option<MeanStd>,
    pub error: Option<String>,
}

impl AblationCell {
    fn failed(e: &Error) -> Self {
        AblationCell {
            accuracy: None,
            f1: None,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    /// One cell per column.
    pub cells: Vec<AblationCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub resampling: AblationTable,
    pub selection: AblationTable,
}

/// Accuracy and macro F1 per model under one (resampling, selection)
/// setting; a failing stage fills the whole column with its error.
fn column(cfg: &PipelineConfig, mode: ResampleMode, sel: SelectionMode) -> Vec<AblationCell> {
    let roster = match cfg.roster() {
        Ok(r) => r,
        Err(e) => return vec![AblationCell::failed(&e)],
    };
    let prepared = match prepare(cfg, mode, sel) {
        Ok(p) => p,
        Err(e) => return roster.iter().map(|_| AblationCell::failed(&e)).collect(),
    };
    fit_roster(&prepared, &roster, &cfg.seeds())
        .into_iter()
        .map(|(_, runs)| match runs {
            Ok(runs) => {
                let acc: Vec<f64> = runs.iter().map(|r| r.report.accuracy).collect();
                let f1: Vec<f64> = runs.iter().map(|r| r.report.macro_avg.f1).collect();
                AblationCell {
                    accuracy: Some(MeanStd::of(&acc)),
                    f1: Some(MeanStd::of(&f1)),
                    error: None,
                }
            }
            Err(e) => AblationCell::failed(&e),
        })
        .collect()
}

fn table(title: &str, columns: Vec<String>, names: &[String], cols: Vec<Vec<AblationCell>>) -> AblationTable {
    AblationTable {
        title: title.to_string(),
        columns,
        rows: names
            .iter()
            .enumerate()
            .map(|(m, name)| AblationRow {
                model: name.clone(),
                cells: cols.iter().map(|c| c[m.min(c.len() - 1)].clone()).collect(),
            })
            .collect(),
    }
}

/// The resampling grid (selection held at the configured mode) and the
/// selection grid (resampling held at the configured mode).
pub fn ablation_run(cfg: &PipelineConfig) -> Result<AblationReport> {
    cfg.validate()?;
    let names: Vec<String> = cfg.roster()?.into_iter().map(|(n, _)| n).collect();
    let resampling: Vec<Vec<AblationCell>> = ResampleMode::ALL
        .par_iter()
        .map(|&m| column(cfg, m, cfg.selection.mode))
        .collect();
    let selection: Vec<Vec<AblationCell>> = SelectionMode::ALL
        .par_iter()
        .map(|&s| column(cfg, cfg.resample.mode, s))
        .collect();
    Ok(AblationReport {
        resampling: table(
            "Data resampling techniques",
            ResampleMode::ALL.iter().map(|m| m.title().to_string()).collect(),
            &names,
            resampling,
        ),
        selection: table(
            "Feature elimination and reduction techniques",
            SelectionMode::ALL.iter().map(|m| m.title().to_string()).collect(),
            &names,
            selection,
        ),
    })
}

impl AblationTable {
    /// Model rows with an accuracy and an F1 column per mode, in percent.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Model".to_string()];
        for c in &self.columns {
            header.push(format!("{c} Acc (%)"));
            header.push(format!("{c} F1 (%)"));
        }
        w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
        for r in &self.rows {
            let mut rec = vec![r.model.clone()];
            for c in &r.cells {
                for m in [&c.accuracy, &c.f1] {
                    rec.push(m.map_or_else(|| "error".to_string(), |m| m.percent()));
                }
            }
            w.write_record(&rec).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Csv(e.to_string()))
    }
}

pub fn write_ablation_outputs(report: &AblationReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, bytes: Vec<u8>| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    put("ablation.json", serde_json::to_vec_pretty(report)?)?;
    put("ablation_resampling.csv", report.resampling.to_csv()?)?;
    put("ablation_selection.csv", report.selection.to_csv()?)
}
