//! HTTP editing service.
//!
//! Scores are computed once when the session starts and tagged with the
//! SHA-256 of the model file (`score_version`). Reads take a consistent
//! snapshot; apply and undo go through the edit engine's single writer.
//! All bodies are JSON; field names are listed in the README.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bathyedit::corpus::{load_corpus, Corpus};
use bathyedit::edit::{
    ApplyOutcome, ApplyRequest, EditAction, EditEngine, EditError, EditLog, LogEntry, Polygon, Rect, Shape,
};
use bathyedit::gbdt::{read_model, Model};
use bathyedit::scores::score_corpus;
use bathyedit::SoundingKey;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_PAGE: usize = 1000;
pub const MAX_PAGE: usize = 10_000;

#[derive(Debug, Clone, Serialize)]
pub struct CruiseInfo {
    pub cruise_id: String,
    pub region_id: String,
    pub count: usize,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

/// Corpus, scores and edit log of one `serve` process.
pub struct Session {
    corpus: Corpus,
    cruises: Vec<CruiseInfo>,
    engine: EditEngine,
}

pub fn score_version(model_bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(model_bytes))
}

impl Session {
    pub fn new(corpus: Corpus, model_bytes: &[u8], log: EditLog) -> Result<Self, CliError> {
        let model = read_model(model_bytes).map_err(CliError::from)?;
        let points = score_corpus(&model, &corpus)?;
        let version = score_version(model_bytes);
        log::info!("scored {} soundings, score_version {version}", points.len());
        let cruises = corpus
            .cruises()
            .iter()
            .map(|c| {
                let lats = c.soundings.iter().map(|s| s.lat);
                let lons = c.soundings.iter().map(|s| s.lon);
                CruiseInfo {
                    cruise_id: c.cruise_id.clone(),
                    region_id: c.region_id.clone(),
                    count: c.len(),
                    lat_min: lats.clone().fold(f64::INFINITY, f64::min),
                    lat_max: lats.fold(f64::NEG_INFINITY, f64::max),
                    lon_min: lons.clone().fold(f64::INFINITY, f64::min),
                    lon_max: lons.fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect();
        Ok(Self {
            corpus,
            cruises,
            engine: EditEngine::new(version, points, log),
        })
    }

    pub fn open(corpus: &Path, model: &Path, edit_log: &Path) -> Result<Self, CliError> {
        let corpus = load_corpus(corpus).map_err(|e| CliError::at(corpus, e))?;
        let bytes = std::fs::read(model).map_err(|e| CliError::io(model, e))?;
        let log = EditLog::open(edit_log).map_err(|e| CliError::at(edit_log, e))?;
        log::info!("edit log {}: {} actions replayed", edit_log.display(), log.actions().len());
        Self::new(corpus, &bytes, log).map_err(|e| CliError::at(model, e))
    }

    pub fn engine(&self) -> &EditEngine {
        &self.engine
    }

    /// Rescores with a new model; previews made against the old scores
    /// become stale.
    pub fn swap_model(&self, model: &Model, model_bytes: &[u8]) -> Result<(), CliError> {
        let points = score_corpus(model, &self.corpus)?;
        self.engine.replace_scores(score_version(model_bytes), points);
        Ok(())
    }
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/cruises", get(cruises))
        .route("/soundings", get(soundings))
        .route("/preview", post(preview))
        .route("/apply", post(apply))
        .route("/undo/{id}", post(undo))
        .route("/log", get(edit_log))
        .with_state(session)
}

pub async fn serve(session: Session, addr: SocketAddr) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Service(format!("bind {addr}: {e}")))?;
    let local = listener
        .local_addr()
        .map_err(|e| CliError::Service(e.to_string()))?;
    log::info!("listening on http://{local}");
    println!("listening on http://{local}");
    axum::serve(listener, router(Arc::new(session)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await
        .map_err(|e| CliError::Service(e.to_string()))
}

// ------------------------------------------------------------ wire types

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeBody {
    Rect {
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
    },
    /// `[lat, lon]` pairs, implicitly closed.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl ShapeBody {
    fn to_shape(&self) -> Result<Shape, EditError> {
        Ok(match self {
            ShapeBody::Rect {
                lat_min,
                lat_max,
                lon_min,
                lon_max,
            } => Shape::Rect(Rect::new(*lat_min, *lat_max, *lon_min, *lon_max)?),
            ShapeBody::Polygon { vertices } => {
                Shape::Polygon(Polygon::new(vertices.iter().map(|v| (v[0], v[1])).collect())?)
            }
        })
    }

    fn from_shape(shape: &Shape) -> Self {
        match shape {
            Shape::Rect(r) => ShapeBody::Rect {
                lat_min: r.lat_min,
                lat_max: r.lat_max,
                lon_min: r.lon_min,
                lon_max: r.lon_max,
            },
            Shape::Polygon(p) => ShapeBody::Polygon {
                vertices: p.vertices().iter().map(|&(a, b)| [a, b]).collect(),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewBody {
    shape: ShapeBody,
    threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyBody {
    shape: ShapeBody,
    threshold: Option<f64>,
    score_version: Option<String>,
    expected_count: Option<usize>,
    id: Option<u64>,
    timestamp: Option<u64>,
}

#[derive(Debug, Serialize)]
struct KeyBody<'a> {
    cruise_id: &'a str,
    seq: u64,
}

fn key_body(k: &SoundingKey) -> KeyBody<'_> {
    KeyBody {
        cruise_id: &k.cruise_id,
        seq: k.seq,
    }
}

fn action_body(a: &EditAction, undone_at: Option<u64>) -> Value {
    json!({
        "id": a.id,
        "kind": a.kind().as_str(),
        "shape": ShapeBody::from_shape(&a.shape),
        "threshold": a.threshold,
        "timestamp": a.timestamp,
        "removed_count": a.removed.len(),
        "undone_at": undone_at,
    })
}

// ------------------------------------------------------------ errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }
}

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        let (status, code) = match e {
            EditError::InvalidRect(_) | EditError::Wraparound | EditError::InvalidPolygon(_) => {
                (StatusCode::BAD_REQUEST, "invalid_shape")
            }
            EditError::InvalidThreshold => (StatusCode::BAD_REQUEST, "invalid_threshold"),
            EditError::UnknownAction(_) => (StatusCode::NOT_FOUND, "unknown_action"),
            EditError::AlreadyUndone(_) => (StatusCode::CONFLICT, "already_undone"),
            EditError::IdConflict(_) | EditError::NonMonotonicId { .. } => {
                (StatusCode::CONFLICT, "id_conflict")
            }
            EditError::Stale(_) => (StatusCode::CONFLICT, "stale"),
            EditError::Io(_) | EditError::Malformed { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        Self {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if self.code == "stale" {
            body["re_preview"] = Value::Bool(true);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        message: e.to_string(),
    })
}

// ------------------------------------------------------------ handlers

async fn cruises(State(s): State<Arc<Session>>) -> Json<Value> {
    Json(json!({
        "score_version": s.engine.score_version(),
        "cruises": s.cruises,
    }))
}

#[derive(Debug, Deserialize)]
struct SoundingsQuery {
    bbox: Option<String>,
    offset: Option<String>,
    limit: Option<String>,
}

fn parse_bbox(text: &str) -> Result<Rect, ApiError> {
    let v: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ApiError::bad_request("bbox must be lat_min,lon_min,lat_max,lon_max"))?;
    let [lat_min, lon_min, lat_max, lon_max] = v[..] else {
        return Err(ApiError::bad_request("bbox must have four numbers"));
    };
    Ok(Rect::new(lat_min, lat_max, lon_min, lon_max)?)
}

fn parse_count(field: &str, text: Option<&str>, default: usize) -> Result<usize, ApiError> {
    text.map_or(Ok(default), |t| {
        t.parse()
            .map_err(|_| ApiError::bad_request(format!("{field} must be a non-negative integer")))
    })
}

async fn soundings(State(s): State<Arc<Session>>, Query(q): Query<SoundingsQuery>) -> ApiResult {
    let bbox = q.bbox.as_deref().map(parse_bbox).transpose()?;
    let offset = parse_count("offset", q.offset.as_deref(), 0)?;
    let limit = parse_count("limit", q.limit.as_deref(), DEFAULT_PAGE)?;
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::bad_request(format!("limit must be in 1..={MAX_PAGE}")));
    }
    let snap = s.engine.snapshot();
    let inside: Vec<_> = snap
        .points
        .iter()
        .filter(|p| bbox.is_none_or(|r| r.contains(p.lat, p.lon)))
        .collect();
    let page: Vec<Value> = inside
        .iter()
        .skip(offset)
        .take(limit)
        .map(|p| {
            json!({
                "cruise_id": &*p.key.cruise_id,
                "seq": p.key.seq,
                "lat": p.lat,
                "lon": p.lon,
                "label": p.label.code().to_string(),
                "normalized_margin": p.score.normalized_margin,
                "removed": snap.removed.contains(&p.key),
            })
        })
        .collect();
    let next = offset.saturating_add(page.len());
    Ok(Json(json!({
        "score_version": snap.score_version,
        "total": inside.len(),
        "offset": offset,
        "limit": limit,
        "next_offset": (next < inside.len()).then_some(next),
        "soundings": page,
    })))
}

async fn preview(State(s): State<Arc<Session>>, body: Bytes) -> ApiResult {
    let body: PreviewBody = parse_body(&body)?;
    let shape = body.shape.to_shape()?;
    let p = blocking(move || s.engine.preview(&shape, body.threshold)).await??;
    Ok(Json(json!({
        "score_version": p.score_version,
        "count": p.ids.len(),
        "already_removed": p.already_removed,
        "ids": p.ids.iter().map(key_body).collect::<Vec<_>>(),
    })))
}

async fn apply(State(s): State<Arc<Session>>, body: Bytes) -> ApiResult {
    let body: ApplyBody = parse_body(&body)?;
    let req = ApplyRequest {
        shape: body.shape.to_shape()?,
        threshold: body.threshold,
        expected_version: body.score_version,
        expected_count: body.expected_count,
        expected_ids: None,
        id: body.id,
        timestamp: body.timestamp,
    };
    let applied = blocking(move || s.engine.apply(req)).await??;
    log::info!(
        "action {} {}: {} soundings removed",
        applied.action.id,
        applied.action.kind().as_str(),
        applied.action.removed.len()
    );
    Ok(Json(json!({
        "id": applied.action.id,
        "removed_count": applied.action.removed.len(),
        "outcome": match applied.outcome {
            ApplyOutcome::Applied => "applied",
            ApplyOutcome::AlreadyApplied => "already_applied",
        },
    })))
}

async fn undo(State(s): State<Arc<Session>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let id: u64 = id
        .parse()
        .map_err(|_| ApiError::bad_request("action id must be a non-negative integer"))?;
    blocking(move || s.engine.undo(id, None)).await??;
    log::info!("action {id} undone");
    Ok(Json(json!({ "id": id, "undone": true })))
}

async fn edit_log(State(s): State<Arc<Session>>) -> Json<Value> {
    let entries: Vec<LogEntry> = s.engine.log_entries();
    Json(json!({
        "removed_count": s.engine.removed().len(),
        "actions": entries.iter().map(|e| action_body(&e.action, e.undone_at)).collect::<Vec<_>>(),
    }))
}
