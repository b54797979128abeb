use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::explain::{explain_instance, DiscretizerStats, ExplainOptions, Explanation};
use crate::learners::{label_of, ClassifierModel, ModelKind};
use crate::preprocess::FittedPreprocessor;
use crate::tabular::{ColumnKind, ColumnMeta, Dataset, Schema};

use super::prepare::FittedSelection;

pub const ARTIFACT_VERSION: u32 = 1;
const MAGIC: &str = "LIFEWELL-ARTIFACT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    pub kind: ModelKind,
    pub model: ClassifierModel,
}

/// Everything needed to score new answers, independent of the config that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    /// Raw input schema.
    pub schema: Schema,
    pub preprocessor: FittedPreprocessor,
    pub selection: FittedSelection,
    /// Model input columns, in order.
    pub feature_codes: Vec<String>,
    /// Quartile bins over the (unresampled) training rows.
    pub discretizer: DiscretizerStats,
    pub models: Vec<NamedModel>,
    /// Name of the model used for predictions and explanations.
    pub primary: String,
    pub seed: u64,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum AnswerProblem {
    Missing,
    Unknown,
    NotFinite,
    OutOfRange { value: f64, min: f64, max: f64 },
    NotInteger { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerIssue {
    pub code: String,
    #[serde(flatten)]
    pub problem: AnswerProblem,
}

impl fmt::Display for AnswerIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.code;
        match &self.problem {
            AnswerProblem::Missing => write!(f, "{c}: no answer given"),
            AnswerProblem::Unknown => write!(f, "{c}: not a questionnaire item"),
            AnswerProblem::NotFinite => write!(f, "{c}: answer is not a finite number"),
            AnswerProblem::OutOfRange { value, min, max } => {
                write!(f, "{c}: {value} outside {min}..={max}")
            }
            AnswerProblem::NotInteger { value } => write!(f, "{c}: {value} is not an encoded option"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    pub class_probs: [f64; 2],
}

impl ModelArtifact {
    pub fn model(&self, name: &str) -> Option<&ClassifierModel> {
        self.models.iter().find(|m| m.name == name).map(|m| &m.model)
    }

    pub fn primary_model(&self) -> &ClassifierModel {
        self.model(&self.primary).expect("primary model is stored")
    }

    /// Items a questionnaire must answer, in schema order.
    pub fn answer_codes(&self) -> Vec<String> {
        self.selection.required_codes(&self.preprocessor.output_codes)
    }

    pub fn answer_columns(&self) -> Vec<&ColumnMeta> {
        self.answer_codes()
            .iter()
            .map(|c| self.schema.column(c).expect("answer code in schema"))
            .collect()
    }

    /// Check answers keyed by code; the result is ordered as
    /// [`Self::answer_codes`].
    pub fn validate_answers(&self, answers: &BTreeMap<String, f64>) -> Result<Vec<f64>, Vec<AnswerIssue>> {
        let cols = self.answer_columns();
        let mut issues = Vec::new();
        let mut out = Vec::with_capacity(cols.len());
        for col in &cols {
            let issue = |problem| AnswerIssue {
                code: col.code.clone(),
                problem,
            };
            let Some(&v) = answers.get(&col.code) else {
                issues.push(issue(AnswerProblem::Missing));
                continue;
            };
            if !v.is_finite() {
                issues.push(issue(AnswerProblem::NotFinite));
                continue;
            }
            if col.kind == ColumnKind::Ordinal {
                let max = (col.categories.len() - 1) as f64;
                if v.fract() != 0.0 {
                    issues.push(issue(AnswerProblem::NotInteger { value: v }));
                    continue;
                }
                if !(0.0..=max).contains(&v) {
                    issues.push(issue(AnswerProblem::OutOfRange { value: v, min: 0.0, max }));
                    continue;
                }
            }
            out.push(v);
        }
        for code in answers.keys() {
            if !cols.iter().any(|c| &c.code == code) {
                issues.push(AnswerIssue {
                    code: code.clone(),
                    problem: AnswerProblem::Unknown,
                });
            }
        }
        if issues.is_empty() {
            Ok(out)
        } else {
            Err(issues)
        }
    }

    /// Model inputs for one validated answer vector.
    pub fn model_row(&self, answers: &[f64]) -> Vec<f64> {
        let codes = self.answer_codes();
        let mut v = answers.to_vec();
        self.preprocessor.clamp_answers(&codes, &mut v);
        self.selection.transform_row(&codes, &v)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<Prediction> {
        let p = self.primary_model().predict_proba_one(row)?;
        Ok(Prediction {
            label: label_of(p),
            class_probs: p,
        })
    }

    pub fn explain_row(&self, row: &[f64], opts: &ExplainOptions) -> Result<Explanation> {
        explain_instance(self.primary_model(), row, &self.discretizer, opts)
    }

    /// Raw labelled data to model inputs with the stored preprocessing.
    pub fn transform(&self, raw: &Dataset) -> Result<Dataset> {
        self.selection.apply(&self.preprocessor.apply(raw)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body = serde_json::to_vec(self)?;
        let digest = hex::encode(Sha256::digest(&body));
        let mut out = format!("{MAGIC} v{} sha256={digest} len={}\n", self.format_version, body.len()).into_bytes();
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Corrupted("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Corrupted("header is not text".into()))?;
        let body = &bytes[nl + 1..];
        let mut parts = header.split(' ');
        if parts.next() != Some(MAGIC) {
            return Err(Error::Corrupted("not a model artifact".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Corrupted("bad version field".into()))?;
        if version != ARTIFACT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: ARTIFACT_VERSION,
            });
        }
        let digest = parts
            .next()
            .and_then(|v| v.strip_prefix("sha256="))
            .ok_or_else(|| Error::Corrupted("bad checksum field".into()))?;
        let len: usize = parts
            .next()
            .and_then(|v| v.strip_prefix("len="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Corrupted("bad length field".into()))?;
        if body.len() != len {
            return Err(Error::Corrupted(format!("body has {} bytes, header says {len}", body.len())));
        }
        if hex::encode(Sha256::digest(body)) != digest {
            return Err(Error::Corrupted("checksum mismatch".into()));
        }
        let a: ModelArtifact = serde_json::from_slice(body)?;
        if a.format_version != version {
            return Err(Error::Corrupted("header and body versions differ".into()));
        }
        if a.model(&a.primary).is_none() {
            return Err(Error::Corrupted(format!("primary model {} is missing", a.primary)));
        }
        Ok(a)
    }
}

/// SHA-256 of a whole artifact file.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write the artifact and return its fingerprint.
pub fn save_artifact(a: &ModelArtifact, path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = a.to_bytes()?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(fingerprint(&bytes))
}

#[derive(Debug, Clone)]
pub struct LoadedArtifact {
    pub artifact: ModelArtifact,
    pub fingerprint: String,
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<LoadedArtifact> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(LoadedArtifact {
        artifact: ModelArtifact::from_bytes(&bytes)?,
        fingerprint: fingerprint(&bytes),
    })
}
