//! HTTP routes.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | GET | `/streams` | | `[StreamSummary]` |
//! | GET | `/streams/{id}/proposals` | `status`, `reviewer`, `voted`, `offset`, `limit` | `Page` |
//! | GET | `/proposals/{id}` | | `Proposal` |
//! | POST | `/proposals/{id}/verdicts` | `{"reviewer_id", "decision"}` | 201 `Proposal` |
//! | GET | `/metrics` | `stream` | `MetricsSnapshot`, or a list without `stream` |
//! | GET | `/console/*` | | static console bundle |
//!
//! Errors are `{"error": "..."}` with 400, 404 or 409.

use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::error::ReviewError;
use crate::store::{Decision, ProposalFilter, ReviewStore};

pub const REVIEWER_HEADER: &str = "x-reviewer-id";

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::NotFound(_) => StatusCode::NOT_FOUND,
            ReviewError::Conflict(_) => StatusCode::CONFLICT,
            ReviewError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ReviewError::BadInput(_) | ReviewError::Core(_) | ReviewError::Io(_) => {
                log::error!("{self}");
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ReviewError>;
type Shared = State<Arc<ReviewStore>>;

#[derive(Debug, Deserialize)]
pub struct VerdictBody {
    #[serde(default)]
    pub reviewer_id: Option<String>,
    pub decision: Decision,
}

#[derive(Debug, Deserialize)]
pub struct MetricsQuery {
    pub stream: Option<String>,
}

fn bad_query(e: QueryRejection) -> ReviewError {
    ReviewError::BadRequest(e.body_text())
}

async fn streams(State(store): Shared) -> impl IntoResponse {
    Json(store.streams())
}

async fn proposals(
    State(store): Shared,
    UrlPath(id): UrlPath<String>,
    filter: Result<Query<ProposalFilter>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let Query(filter) = filter.map_err(bad_query)?;
    Ok(Json(store.list(&id, &filter)?))
}

async fn proposal(State(store): Shared, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(store.proposal(&id)?))
}

async fn submit(
    State(store): Shared,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Result<Json<VerdictBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(body) = body.map_err(|e| ReviewError::BadRequest(e.body_text()))?;
    let header = headers
        .get(REVIEWER_HEADER)
        .map(|v| v.to_str().map(str::to_string))
        .transpose()
        .map_err(|_| ReviewError::BadRequest("reviewer header is not text".into()))?;
    let reviewer = match (body.reviewer_id, header) {
        (Some(b), Some(h)) if b != h => {
            return Err(ReviewError::BadRequest(format!(
                "reviewer {b:?} disagrees with header {h:?}"
            )))
        }
        (Some(r), _) | (None, Some(r)) => r,
        (None, None) => return Err(ReviewError::BadRequest("missing reviewer_id".into())),
    };
    // fsync happens inside submit; keep it off the async workers
    let updated = tokio::task::spawn_blocking(move || store.submit(&id, &reviewer, body.decision))
        .await
        .map_err(|e| ReviewError::Io(std::io::Error::other(e)))??;
    Ok((StatusCode::CREATED, Json(updated)))
}

async fn metrics(State(store): Shared, query: Result<Query<MetricsQuery>, QueryRejection>) -> ApiResult<Response> {
    let Query(query) = query.map_err(bad_query)?;
    Ok(match query.stream {
        Some(id) => Json(store.metrics(&id)?).into_response(),
        None => Json(store.all_metrics()).into_response(),
    })
}

/// Build the router; the console bundle is mounted at `/console` when given.
pub fn router(store: Arc<ReviewStore>, console_dir: Option<&Path>) -> Router {
    let app = Router::new()
        .route("/streams", get(streams))
        .route("/streams/{id}/proposals", get(proposals))
        .route("/proposals/{id}", get(proposal))
        .route("/proposals/{id}/verdicts", axum::routing::post(submit))
        .route("/metrics", get(metrics));
    let app = match console_dir {
        Some(dir) => app.nest_service("/console", ServeDir::new(dir)),
        None => app,
    };
    app.with_state(store)
}
