//! Wire types and the request logic behind each endpoint, free of HTTP.

use std::collections::BTreeMap;

use lifewell_core::explain::{ExplainOptions, Explanation};
use lifewell_core::pipeline::{AnswerIssue, ModelArtifact};
use lifewell_core::tabular::{class_name, ColumnKind, ItemGroup, CONTENT, DISCONTENT};
use serde::{Deserialize, Serialize};

/// Rules returned unless the caller asks for the full list.
pub const DEFAULT_RULES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub value: u32,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireItem {
    pub code: String,
    pub prompt: String,
    pub kind: ColumnKind,
    /// Empty for free numeric answers such as age.
    pub options: Vec<AnswerOption>,
    pub category: Option<ItemGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnairePayload {
    pub fingerprint: String,
    pub items: Vec<QuestionnaireItem>,
}

pub fn questionnaire(artifact: &ModelArtifact, fingerprint: &str) -> QuestionnairePayload {
    let items = artifact
        .answer_columns()
        .into_iter()
        .map(|c| QuestionnaireItem {
            code: c.code.clone(),
            prompt: c.prompt.clone(),
            kind: c.kind,
            options: c
                .categories
                .iter()
                .enumerate()
                .map(|(i, label)| AnswerOption {
                    value: i as u32,
                    label: label.clone(),
                })
                .collect(),
            category: c.group,
        })
        .collect();
    QuestionnairePayload {
        fingerprint: fingerprint.to_string(),
        items,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probabilities {
    pub content: f64,
    pub discontent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub code: String,
    pub rule: String,
    /// Positive values push toward `explained_class`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBody {
    pub explained_class: String,
    pub intercept: f64,
    pub local_prediction: f64,
    pub fidelity: f64,
    pub total_rules: usize,
    pub rules: Vec<Rule>,
}

impl ExplanationBody {
    pub fn from_explanation(e: &Explanation, limit: Option<usize>) -> Self {
        let n = limit.unwrap_or(e.contributions.len());
        ExplanationBody {
            explained_class: class_name(e.explained_class).to_string(),
            intercept: e.intercept,
            local_prediction: e.local_prediction,
            fidelity: e.fidelity,
            total_rules: e.contributions.len(),
            rules: e
                .contributions
                .iter()
                .take(n)
                .map(|c| Rule {
                    code: c.code.clone(),
                    rule: c.rule.clone(),
                    weight: c.weight,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub label: String,
    pub probabilities: Probabilities,
    pub model: String,
    pub explanation: ExplanationBody,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ApiError {
    /// No artifact is loaded.
    Unavailable { message: String },
    BadRequest { message: String },
    Validation { message: String, issues: Vec<AnswerIssue> },
    Internal { message: String },
}

impl ApiError {
    pub fn unavailable() -> Self {
        ApiError::Unavailable {
            message: "no model artifact is loaded".into(),
        }
    }
}

/// Validate, score and explain one set of answers.
pub fn predict(
    artifact: &ModelArtifact,
    fingerprint: &str,
    answers: &BTreeMap<String, f64>,
    full: bool,
    opts: &ExplainOptions,
) -> Result<PredictResponse, ApiError> {
    let row = artifact.validate_answers(answers).map_err(|issues| {
        let message = issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        ApiError::Validation { message, issues }
    })?;
    let internal = |e: lifewell_core::Error| ApiError::Internal { message: e.to_string() };
    let x = artifact.model_row(&row);
    let p = artifact.predict_row(&x).map_err(internal)?;
    let e = artifact.explain_row(&x, opts).map_err(internal)?;
    Ok(PredictResponse {
        label: class_name(p.label).to_string(),
        probabilities: Probabilities {
            content: p.class_probs[CONTENT as usize],
            discontent: p.class_probs[DISCONTENT as usize],
        },
        model: artifact.primary.clone(),
        explanation: ExplanationBody::from_explanation(&e, (!full).then_some(DEFAULT_RULES)),
        fingerprint: fingerprint.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    /// "ok" with an artifact, "degraded" without.
    pub status: String,
    pub fingerprint: Option<String>,
    pub format_version: Option<u32>,
    pub model: Option<String>,
    pub uptime_secs: f64,
}
