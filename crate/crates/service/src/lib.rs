//! HTTP front end for a trained artifact: the questionnaire, predictions
//! with explanations, and a health probe.
//!
//! Request bodies are never logged or stored.

pub mod api;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lifewell_core::explain::ExplainOptions;
use lifewell_core::pipeline::{load_artifact, LoadedArtifact};
use log::info;
use serde::Deserialize;
use tower::limit::ConcurrencyLimitLayer;

pub use api::{ApiError, Health, PredictResponse, QuestionnairePayload};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_CONCURRENCY: usize = 64;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Without an artifact the service starts degraded.
    pub artifact: Option<PathBuf>,
    pub bind: SocketAddr,
    pub max_concurrency: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            artifact: None,
            bind: DEFAULT_BIND.parse().expect("valid default address"),
            max_concurrency: DEFAULT_MAX_CONCURRENCY,
        }
    }
}

struct Served {
    loaded: LoadedArtifact,
    questionnaire: QuestionnairePayload,
}

/// Shared read-only state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    served: Option<Arc<Served>>,
    explain: ExplainOptions,
    started: Instant,
}

impl AppState {
    pub fn new(loaded: Option<LoadedArtifact>) -> Self {
        let served = loaded.map(|loaded| {
            let questionnaire = api::questionnaire(&loaded.artifact, &loaded.fingerprint);
            Arc::new(Served { loaded, questionnaire })
        });
        AppState {
            served,
            explain: ExplainOptions::default(),
            started: Instant::now(),
        }
    }

    pub fn with_explain_options(mut self, opts: ExplainOptions) -> Self {
        self.explain = opts;
        self
    }

    pub fn load(config: &ServiceConfig) -> lifewell_core::Result<Self> {
        let loaded = config.artifact.as_deref().map(load_artifact).transpose()?;
        Ok(AppState::new(loaded))
    }

    fn served(&self) -> Result<&Arc<Served>, ApiError> {
        self.served.as_ref().ok_or_else(ApiError::unavailable)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::Unavailable { .. } => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ApiError::Validation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self)).into_response()
    }
}

async fn questionnaire(State(state): State<AppState>) -> Result<Json<QuestionnairePayload>, ApiError> {
    Ok(Json(state.served()?.questionnaire.clone()))
}

#[derive(Debug, Default, Deserialize)]
struct PredictQuery {
    #[serde(default)]
    full: bool,
}

async fn predict(
    State(state): State<AppState>,
    Query(q): Query<PredictQuery>,
    body: Result<Json<BTreeMap<String, f64>>, JsonRejection>,
) -> Result<Json<PredictResponse>, ApiError> {
    let served = Arc::clone(state.served()?);
    let Json(answers) = body.map_err(|e| ApiError::BadRequest { message: e.body_text() })?;
    let opts = state.explain;
    // explanation sampling is CPU bound
    tokio::task::spawn_blocking(move || {
        let l = &served.loaded;
        api::predict(&l.artifact, &l.fingerprint, &answers, q.full, &opts)
    })
    .await
    .map_err(|e| ApiError::Internal { message: e.to_string() })?
    .map(Json)
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let l = state.served.as_ref().map(|s| &s.loaded);
    Json(Health {
        status: if l.is_some() { "ok" } else { "degraded" }.into(),
        fingerprint: l.map(|l| l.fingerprint.clone()),
        format_version: l.map(|l| l.artifact.format_version),
        model: l.map(|l| l.artifact.primary.clone()),
        uptime_secs: state.started.elapsed().as_secs_f64(),
    })
}

pub fn router(state: AppState, max_concurrency: usize) -> Router {
    Router::new()
        .route("/questionnaire", get(questionnaire))
        .route("/predict", post(predict))
        .route("/health", get(health))
        .layer(ConcurrencyLimitLayer::new(max_concurrency.max(1)))
        .with_state(state)
}

/// Load the artifact, bind, and serve until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = AppState::load(&config)?;
    match &state.served {
        Some(s) => info!("serving {} ({})", s.loaded.artifact.primary, s.loaded.fingerprint),
        None => info!("no artifact configured; starting degraded"),
    }
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, config.max_concurrency))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
