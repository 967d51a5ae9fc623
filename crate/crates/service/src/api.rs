//! HTTP routes under `/api`.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use aimguard_core::features::FEATURE_NAMES;
use aimguard_core::trajectory::{diverging_color, render_trajectory, ScreenPoint, TrajectoryDrawing};

use crate::store::{CaseFilter, CaseStatus, CaseStore, ServiceError, VerdictSubmission};

pub const API_VERSION: &str = "1";
pub const TOKEN_HEADER: &str = "x-review-token";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<CaseStore>,
    /// Shared secret required on writes when set.
    pub token: Option<String>,
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<String>,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, fields) = match &self.0 {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", vec![]),
            ServiceError::Conflict { .. } => (StatusCode::CONFLICT, "conflict", vec![]),
            ServiceError::Validation(f) => (StatusCode::UNPROCESSABLE_ENTITY, "validation", f.clone()),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", vec![]),
        };
        let body = ErrorBody {
            error: kind,
            message: self.0.to_string(),
            fields,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize, Default)]
struct ListQuery {
    status: Option<String>,
    min_p: Option<f64>,
    page: Option<usize>,
    per_page: Option<usize>,
}

async fn list_cases(State(s): State<AppState>, Query(q): Query<ListQuery>) -> ApiResult<Response> {
    let status = match q.status.as_deref() {
        None | Some("") => None,
        Some(v) => Some(
            v.parse::<CaseStatus>()
                .map_err(|_| ServiceError::Validation(vec!["status".into()]))?,
        ),
    };
    if q.min_p.is_some_and(|p| !p.is_finite()) {
        return Err(ServiceError::Validation(vec!["min_p".into()]).into());
    }
    let filter = CaseFilter {
        status,
        min_p: q.min_p,
        page: q.page.unwrap_or(1),
        per_page: q.per_page.unwrap_or(0).min(500),
    };
    let (total, cases) = s.store.list_cases(&filter);
    let mut resp = Json(cases).into_response();
    resp.headers_mut()
        .insert("x-total-count", HeaderValue::from_str(&total.to_string()).expect("digits"));
    Ok(resp)
}

async fn get_case(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(s.store.get_case(&id)?).into_response())
}

#[derive(Deserialize, Default)]
struct TickQuery {
    tick: Option<i64>,
    feature: Option<String>,
}

async fn get_explanation(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TickQuery>,
) -> ApiResult<Response> {
    let bytes = s.store.get_explanation(&id, q.tick)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

/// One playback step of a rendered trajectory.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: i64,
    pub x: f64,
    pub y: f64,
    pub fired: bool,
    pub eliminated: bool,
    pub value: f64,
    pub color: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct FramesView {
    pub case_id: String,
    pub elimination_id: String,
    pub feature: String,
    pub drawing: TrajectoryDrawing,
    pub frames: Vec<Frame>,
}

async fn get_frames(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TickQuery>,
) -> ApiResult<Response> {
    let doc = s.store.explanation_doc(&id, q.tick)?;
    let feature = match q.feature {
        Some(f) if FEATURE_NAMES.contains(&f.as_str()) => f,
        Some(_) => return Err(ServiceError::Validation(vec!["feature".into()]).into()),
        // Default to the feature carrying the most attribution mass.
        None => FEATURE_NAMES
            .iter()
            .max_by(|a, b| {
                let mass = |n: &str| doc.feature_track(n).iter().map(|v| v.abs()).sum::<f64>();
                mass(a).total_cmp(&mass(b))
            })
            .map(|s| s.to_string())
            .expect("eight features"),
    };
    let values = doc.feature_track(&feature);
    let points: Vec<ScreenPoint> = doc
        .ticks
        .iter()
        .map(|t| ScreenPoint {
            tick: t.t,
            x: t.x,
            y: t.y,
            fired: t.fired,
            eliminated: t.eliminated,
        })
        .collect();
    let drawing = render_trajectory(
        &points,
        Some(&values),
        aimguard_core::trajectory::DEFAULT_WIDTH,
        aimguard_core::trajectory::DEFAULT_HEIGHT,
    );
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let frames = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (x, y) = if i == 0 {
                drawing.segments.first().map_or((p.x, p.y), |s| s.from)
            } else {
                drawing.segments[i - 1].to
            };
            let rgb = diverging_color(if scale > 0.0 { values[i] / scale } else { 0.0 });
            Frame {
                t: p.tick,
                x,
                y,
                fired: p.fired,
                eliminated: p.eliminated,
                value: values[i],
                color: format!("#{:02x}{:02x}{:02x}", rgb.0, rgb.1, rgb.2),
            }
        })
        .collect();
    Ok(Json(FramesView {
        case_id: id,
        elimination_id: doc.elimination_id,
        feature,
        drawing,
        frames,
    })
    .into_response())
}

async fn post_verdict(
    State(s): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    if let Some(token) = &s.token {
        let given = headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(token.as_str()) {
            let body = ErrorBody {
                error: "unauthorized",
                message: format!("missing or wrong {TOKEN_HEADER} header"),
                fields: vec![],
            };
            return Ok((StatusCode::UNAUTHORIZED, Json(body)).into_response());
        }
    }
    let submission: VerdictSubmission =
        serde_json::from_slice(&body).map_err(|e| ServiceError::Validation(vec![format!("body: {e}")]))?;
    let store = s.store.clone();
    let verdict = tokio::task::spawn_blocking(move || store.post_verdict(&id, submission))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    Ok((StatusCode::CREATED, Json(verdict)).into_response())
}

async fn get_audit(State(s): State<AppState>) -> ApiResult<Response> {
    let store = s.store.clone();
    let bytes = tokio::task::spawn_blocking(move || store.export_audit())
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "api_version": API_VERSION,
        "version": env!("CARGO_PKG_VERSION"),
    }))
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/cases", get(list_cases))
        .route("/api/cases/{id}", get(get_case))
        .route("/api/cases/{id}/explanation", get(get_explanation))
        .route("/api/cases/{id}/frames", get(get_frames))
        .route("/api/cases/{id}/verdicts", axum::routing::post(post_verdict))
        .route("/api/audit", get(get_audit))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
