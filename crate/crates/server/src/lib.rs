//! HTTP front end for [`SurveyStore`].
//!
//! * `GET  /api/questionnaires/{id}` returns the questionnaire JSON
//! * `POST /api/questionnaires/{id}/submissions` takes
//!   `{"worker_id": "...", "answers": {"r3-age": 11}}` and returns one outcome
//!   per answer
//! * `GET  /api/jobs/{id}` returns per-question counts and progress
//! * `GET  /` serves the survey UI bundle, or a placeholder page

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crowdimpute_core::questionnaire::Questionnaire;
use crowdimpute_core::service::{QuestionOutcome, RawAnswer, ServiceError, Submission, SurveyStore};

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><title>Survey service</title></head>\n<body><p>The survey \
                           service is running. No UI bundle is installed; the JSON API lives under \
                           <code>/api</code>.</p></body></html>\n";

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub k_override: Option<usize>,
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    store: Arc<SurveyStore>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::UnknownQuestionnaire(_) | ServiceError::UnknownJob(_) => StatusCode::NOT_FOUND,
            ServiceError::Malformed(_) => StatusCode::BAD_REQUEST,
            ServiceError::Io(_) | ServiceError::Json(_) | ServiceError::InvalidJob(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct SubmissionBody {
    worker_id: String,
    answers: std::collections::BTreeMap<String, RawAnswer>,
    #[serde(default)]
    questionnaire_id: Option<String>,
}

async fn get_questionnaire(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Questionnaire>, ApiError> {
    Ok(Json(state.store.questionnaire(&id)?.clone()))
}

async fn post_submission(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SubmissionBody>, JsonRejection>,
) -> Result<Json<Vec<QuestionOutcome>>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))?;
    if body.questionnaire_id.as_deref().is_some_and(|q| q != id) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "questionnaire_id does not match the URL"));
    }
    let submission = Submission { questionnaire_id: id, worker_id: body.worker_id, answers: body.answers };
    let store = state.store.clone();
    let outcomes = tokio::task::spawn_blocking(move || store.submit(&submission))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(outcomes))
}

async fn get_job(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<crowdimpute_core::service::JobStatus>, ApiError> {
    Ok(Json(state.store.job_status(&id)?))
}

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

pub fn router(store: Arc<SurveyStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/questionnaires/{id}", get(get_questionnaire))
        .route("/api/questionnaires/{id}/submissions", axum::routing::post(post_submission))
        .route("/api/jobs/{id}", get(get_job))
        .with_state(AppState { store });
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    }
}

/// Opens the store in `data_dir` and serves until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let store = Arc::new(SurveyStore::open(&cfg.data_dir, cfg.k_override)?);
    let job = store.job();
    log::info!("job '{}' with {} questionnaires, k = {}", job.id, job.questionnaire_ids.len(), job.k);
    let app = router(store, cfg.static_dir);
    let addr = SocketAddr::from(([0, 0, 0, 0], cfg.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
