use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::ApiError;
use crate::session::{
    AgreementReport, Event, Export, Next, Resolution, Round, SessionPair, Summary, Verdict, WarmupItem,
};
use crate::store::{now_millis, Store};

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateRequest {
    pub session_id: String,
    pub annotators: Vec<String>,
    pub pairs: Vec<SessionPair>,
    #[serde(default)]
    pub warmup: Vec<WarmupItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotatorQuery {
    pub annotator: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRequest {
    pub annotator: String,
    pub pair_id: String,
    pub verdict: Verdict,
    /// Defaults to the session's current round.
    #[serde(default)]
    pub round: Option<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolutionRequest {
    pub pair_id: String,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    /// `recorded` when the journal grew, `unchanged` for a repeat.
    pub status: String,
    pub round: Round,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupView {
    pub items: Vec<WarmupItem>,
    pub acknowledged: bool,
}

fn json<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(b)| b).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(b)| b).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn ack(written: bool, round: Round) -> Json<Ack> {
    Json(Ack { status: if written { "recorded" } else { "unchanged" }.to_string(), round })
}

async fn create(
    State(store): State<Arc<Store>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Summary>), ApiError> {
    let req = json(body)?;
    let annotators: [String; 2] = req
        .annotators
        .try_into()
        .map_err(|a: Vec<String>| ApiError::bad_request(format!("exactly 2 annotators required, got {}", a.len())))?;
    let state = store.create(Event::Created {
        session_id: req.session_id,
        annotators,
        pairs: req.pairs,
        warmup: req.warmup,
        at: now_millis(),
    })?;
    Ok((StatusCode::CREATED, Json(state.summary())))
}

async fn summary(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Summary> {
    store.read(&id, |s| Ok(Json(s.summary())))
}

async fn next(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
) -> ApiResult<Next> {
    let q = query(q)?;
    store.read(&id, |s| s.next_for(&q.annotator).map(Json))
}

async fn label(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> ApiResult<Ack> {
    let req = json(body)?;
    let (written, state) = store.write(&id, |s| {
        let round = match req.round {
            Some(r) => r,
            None => match s.round() {
                Round::One => 1,
                Round::Two => 2,
                Round::Closed => return Err(ApiError::wrong_round("session is closed")),
            },
        };
        Ok(Event::Label {
            round,
            annotator: req.annotator,
            pair_id: req.pair_id,
            verdict: req.verdict,
            at: now_millis(),
        })
    })?;
    Ok(ack(written, state.round()))
}

async fn report(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<AgreementReport> {
    store.read(&id, |s| s.report().map(Json))
}

async fn resolve(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Result<Json<ResolutionRequest>, JsonRejection>,
) -> ApiResult<Ack> {
    let req = json(body)?;
    let (written, state) = store
        .write(&id, |_| Ok(Event::Resolved { pair_id: req.pair_id, resolution: req.resolution, at: now_millis() }))?;
    Ok(ack(written, state.round()))
}

async fn close(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Ack> {
    let (written, state) = store.write(&id, |_| Ok(Event::Closed { at: now_millis() }))?;
    Ok(ack(written, state.round()))
}

async fn export(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Export> {
    store.read(&id, |s| s.export().map(Json))
}

async fn warmup(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
) -> ApiResult<WarmupView> {
    let q = query(q)?;
    store.read(&id, |s| {
        let a = s.annotator_index(&q.annotator)?;
        Ok(Json(WarmupView {
            items: s.warmup.clone(),
            acknowledged: s.warmup.is_empty() || s.warmup_acked.contains(&a),
        }))
    })
}

async fn warmup_ack(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Result<Json<AnnotatorQuery>, JsonRejection>,
) -> ApiResult<Ack> {
    let req = json(body)?;
    let (written, state) = store.write(&id, |_| Ok(Event::WarmupAck { annotator: req.annotator, at: now_millis() }))?;
    Ok(ack(written, state.round()))
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such route")
}

/// All API routes; files under `static_dir`, when given, are served for
/// every other path.
pub fn router(store: Arc<Store>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(summary))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/labels", post(label))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/resolutions", post(resolve))
        .route("/sessions/{id}/close", post(close))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/warmup", get(warmup))
        .route("/sessions/{id}/warmup/ack", post(warmup_ack))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: std::net::SocketAddr, store: Arc<Store>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("annotation service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
