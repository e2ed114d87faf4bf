use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use super::review::Verdict;
use super::store::ReviewStore;
use crate::error::Error;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Authorization(_) => StatusCode::FORBIDDEN,
            Error::Validation(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({"error": self.0.kind(), "message": self.0.to_string()});
        (status, Json(body)).into_response()
    }
}

fn bad_body(e: JsonRejection) -> ApiError {
    ApiError(Error::Validation(e.body_text()))
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Deserialize)]
pub struct CreateSession {
    pub session_id: Option<String>,
    pub sample_size: usize,
    pub annotators: Vec<String>,
    pub seed: u64,
}

#[derive(Deserialize)]
pub struct ItemsQuery {
    pub annotator: Option<String>,
}

#[derive(Deserialize)]
pub struct PostVerdict {
    pub item_id: String,
    pub annotator: String,
    pub verdict: Verdict,
}

async fn list_sessions(State(store): State<Arc<ReviewStore>>) -> Json<serde_json::Value> {
    Json(json!({"sessions": store.list()}))
}

async fn create_session(
    State(store): State<Arc<ReviewStore>>,
    req: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let Json(req) = req.map_err(bad_body)?;
    let id = req
        .session_id
        .unwrap_or_else(|| format!("s{}-n{}", req.seed, req.sample_size));
    let s = store.create(&id, req.sample_size, &req.annotators, req.seed)?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(s).map_err(Error::from)?)))
}

async fn session_items(
    State(store): State<Arc<ReviewStore>>,
    Path(id): Path<String>,
    q: Result<Query<ItemsQuery>, QueryRejection>,
) -> ApiResult<super::store::ItemsPage> {
    let Query(q) = q.map_err(|e| ApiError(Error::Validation(e.body_text())))?;
    Ok(Json(store.items_for(&id, q.annotator.as_deref())?))
}

async fn item(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult<super::review::ReviewItem> {
    Ok(Json(store.item(&id)?))
}

async fn post_verdict(
    State(store): State<Arc<ReviewStore>>,
    Path(id): Path<String>,
    v: Result<Json<PostVerdict>, JsonRejection>,
) -> ApiResult<super::store::VerdictAck> {
    let Json(v) = v.map_err(bad_body)?;
    let store2 = store.clone();
    let ack = tokio::task::spawn_blocking(move || store2.record(&id, &v.item_id, &v.annotator, v.verdict))
        .await
        .map_err(|e| Error::Validation(format!("verdict task failed: {e}")))??;
    Ok(Json(ack))
}

async fn stats(State(store): State<Arc<ReviewStore>>, Path(id): Path<String>) -> ApiResult<super::store::SessionStats> {
    Ok(Json(store.stats(&id)?))
}

/// Routes for the review API, frame images under `/frames/`, and an
/// optional static UI bundle at the root.
pub fn router(store: Arc<ReviewStore>, frames_dir: Option<PathBuf>, ui_dir: Option<PathBuf>) -> Router {
    let mut r = Router::new()
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}/items", get(session_items))
        .route("/api/sessions/{id}/verdicts", post(post_verdict))
        .route("/api/sessions/{id}/stats", get(stats))
        .route("/api/items/{id}", get(item))
        .with_state(store);
    if let Some(f) = frames_dir {
        r = r.nest_service("/frames", ServeDir::new(f));
    }
    if let Some(u) = ui_dir {
        r = r.fallback_service(ServeDir::new(u));
    }
    r
}

/// Serve until ctrl-c.
pub fn serve(router: Router, addr: std::net::SocketAddr) -> crate::error::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("starting runtime", e))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(format!("binding {addr}"), e))?;
        log::info!("review server listening on http://{addr}");
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io("serving", e))
    })
}
