//! HTTP routes of the conductor.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use glr_adapt_core::calibration::{calibrate, CalibrationReport};
use glr_adapt_core::{schema, Decision, Design, DesignSpec, Error, SufficientStat};

use crate::session::{increment_from_cumulative, AuditEntry, TrialSession};
use crate::store::{Store, StoreError};

pub type AppState = Arc<Store>;

/// Error document `{code, message, field?}` with its HTTP status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    /// Maps an engine error raised while validating input.
    fn input(e: Error) -> Self {
        let status = match e {
            Error::Spec { .. } | Error::Domain(_) => StatusCode::BAD_REQUEST,
            Error::Usage(_) => StatusCode::CONFLICT,
            Error::Infeasible(_) | Error::Numeric(_) | Error::Precision(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError {
            status,
            code: e.code(),
            field: e.field().map(str::to_string),
            message: e.to_string(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(f) = self.field {
            body["field"] = Value::String(f);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn document<T: Serialize>(status: StatusCode, doc: &T) -> Response {
    (status, Json(schema::to_value(doc))).into_response()
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdInput {
    b: f64,
    b_tilde: f64,
    c: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    spec: DesignSpec,
    /// Fixed thresholds; calibrated from the spec when absent.
    #[serde(default)]
    thresholds: Option<ThresholdInput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageRequest {
    #[serde(default)]
    increment: Option<SufficientStat>,
    #[serde(default)]
    cumulative: Option<SufficientStat>,
}

#[derive(Debug, Deserialize)]
struct Page {
    #[serde(default)]
    offset: usize,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    50
}

const MAX_LIMIT: usize = 500;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/trials", post(create).get(list))
        .route("/trials/{id}", get(fetch))
        .route("/trials/{id}/stages", post(submit))
        .with_state(store)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn create(State(store): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateRequest = parse(&body)?;
    let design = Design::new(req.spec.clone()).map_err(ApiError::input)?;
    let (thresholds, calibration) = match req.thresholds {
        Some(t) => {
            for (name, v) in [("thresholds.b", t.b), ("thresholds.b_tilde", t.b_tilde), ("thresholds.c", t.c)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ApiError::input(Error::spec(name, "must be finite and non-negative")));
                }
            }
            (design.thresholds(t.b, t.b_tilde, t.c), None)
        }
        None => {
            let d = design.clone();
            let report: CalibrationReport = tokio::task::spawn_blocking(move || calibrate(&d))
                .await
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "numeric", e.to_string()))?
                .map_err(ApiError::input)?;
            (report.thresholds, Some(report))
        }
    };
    let session = TrialSession {
        id: new_id(),
        created_at_ms: now_ms(),
        spec: req.spec,
        thresholds,
        calibration,
        state: design.initial_state(),
        audit_log: Vec::new(),
    };
    let _guard = store.lock(&session.id).await;
    store.save(&session)?;
    Ok(document(StatusCode::CREATED, &session.view(&design)))
}

fn new_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

async fn list(State(store): State<AppState>, Query(page): Query<Page>) -> ApiResult<Response> {
    let limit = page.limit.min(MAX_LIMIT);
    let all = store.list()?;
    let total = all.len();
    let items: Vec<_> = all.iter().skip(page.offset).take(limit).map(TrialSession::summary).collect();
    Ok(document(
        StatusCode::OK,
        &json!({ "items": items, "total": total, "offset": page.offset, "limit": limit }),
    ))
}

async fn fetch(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = store.load(&id)?;
    let design = stored_design(&session)?;
    Ok(document(StatusCode::OK, &session.view(&design)))
}

#[derive(Serialize)]
struct StageResponse {
    decision: Decision,
    session: crate::session::SessionView,
}

async fn submit(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: StageRequest = parse(&body)?;
    let _guard = store.lock(&id).await;
    let mut session = store.load(&id)?;
    let design = stored_design(&session)?;
    if session.state.terminal.is_some() {
        return Err(ApiError::input(Error::Usage(format!("trial {id} has already terminated"))));
    }
    let increment = match (req.increment, req.cumulative) {
        (Some(inc), None) => inc,
        (None, Some(cum)) => {
            increment_from_cumulative(design.model(), &session.state, &cum).map_err(ApiError::input)?
        }
        _ => {
            return Err(ApiError::input(Error::Spec {
                field: None,
                message: "exactly one of `increment` and `cumulative` is required".into(),
            }))
        }
    };
    let (state, decision) = design
        .step(&session.thresholds, &session.state, &increment)
        .map_err(ApiError::input)?;
    session.state = state;
    session.audit_log.push(AuditEntry {
        timestamp_ms: now_ms(),
        increment,
        decision,
    });
    store.save(&session)?;
    let view = session.view(&design);
    Ok(document(StatusCode::OK, &StageResponse { decision, session: view }))
}

fn stored_design(session: &TrialSession) -> ApiResult<Design> {
    session
        .design()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()))
}

fn parse<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let text = std::str::from_utf8(body)
        .map_err(|_| ApiError::input(Error::Spec { field: None, message: "body is not UTF-8".into() }))?;
    schema::from_str(text).map_err(ApiError::input)
}
