//! HTTP facade over a frozen checkpoint for interactive latent-space browsing.
//!
//! | method | path                | body / result                                          |
//! |--------|---------------------|--------------------------------------------------------|
//! | GET    | `/api/info`         | latent size, prior, vocabulary, corpus size, bbox      |
//! | GET    | `/api/faces`        | face list of the base mesh                             |
//! | POST   | `/api/decode`       | `{code, condition?, vertices_only?}` → mesh            |
//! | POST   | `/api/grid`         | `{dims, base_code, range, resolution, condition?}`     |
//! | POST   | `/api/interpolate`  | `{a_code, b_code, steps, condition?, vertices_only?}`  |
//! | GET    | `/api/model/{k}`    | corpus model `k` and its posterior mean                |
//!
//! Malformed bodies and wrong code lengths answer 400, unknown models 404
//! and condition mismatches 409.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use meshvae::corpus::ShapeCorpus;
use meshvae::ops::ShapeModel;
use meshvae::vae::Checkpoint;
use meshvae::{Error, Mesh};

/// Immutable server state shared by all handlers.
pub struct Explorer {
    model: ShapeModel,
    corpus: Option<ShapeCorpus>,
    means: Vec<Vec<f64>>,
    requests: AtomicU64,
}

impl Explorer {
    pub fn new(checkpoint: Checkpoint, corpus: Option<ShapeCorpus>) -> meshvae::Result<Self> {
        let model = ShapeModel::new(checkpoint)?;
        let means = match &corpus {
            Some(c) => model.posterior_means(c, &(0..c.len()).collect::<Vec<_>>())?,
            None => Vec::new(),
        };
        Ok(Explorer {
            model,
            corpus,
            means,
            requests: AtomicU64::new(0),
        })
    }

    pub fn model(&self) -> &ShapeModel {
        &self.model
    }

    pub fn requests_served(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Condition(_) => StatusCode::CONFLICT,
            Error::LengthMismatch { .. } | Error::InvalidArgument(_) | Error::Shape(_) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult = Result<Json<serde_json::Value>, ApiError>;

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError(
            StatusCode::BAD_REQUEST,
            format!("malformed request body: {e}"),
        )
    })
}

fn vertices(mesh: &Mesh) -> Vec<[f64; 3]> {
    mesh.vertices().iter().map(|p| [p.x, p.y, p.z]).collect()
}

fn faces(mesh: &Mesh) -> &[[usize; 3]] {
    mesh.faces()
}

#[derive(Debug, Deserialize)]
struct DecodeRequest {
    code: Vec<f64>,
    condition: Option<Vec<String>>,
    #[serde(default)]
    vertices_only: bool,
}

#[derive(Debug, Deserialize)]
struct GridRequest {
    dims: [usize; 2],
    base_code: Vec<f64>,
    range: [f64; 2],
    resolution: usize,
    condition: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct InterpolateRequest {
    a_code: Vec<f64>,
    b_code: Vec<f64>,
    steps: usize,
    condition: Option<Vec<String>>,
    #[serde(default)]
    vertices_only: bool,
}

#[derive(Debug, Serialize)]
struct Frame {
    code: Vec<f64>,
    vertices: Vec<[f64; 3]>,
}

const MAX_GRID_RESOLUTION: usize = 32;
const MAX_STEPS: usize = 256;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn info(State(s): State<Arc<Explorer>>) -> ApiResult {
    s.requests.fetch_add(1, Ordering::Relaxed);
    let cp = &s.model.checkpoint;
    let (lo, hi) = cp.reference.bounding_box();
    Ok(Json(json!({
        "latent_dim": cp.latent_dim(),
        "sigma_object": cp.sigma_object(),
        "conditions": cp.vocabularies,
        "corpus_size": s.corpus.as_ref().map_or(0, ShapeCorpus::len),
        "vertex_count": cp.reference.vertex_count(),
        "feature_len": cp.feature_len(),
        "bbox": { "min": [lo.x, lo.y, lo.z], "max": [hi.x, hi.y, hi.z] },
    })))
}

async fn faces_handler(State(s): State<Arc<Explorer>>) -> ApiResult {
    s.requests.fetch_add(1, Ordering::Relaxed);
    Ok(Json(json!({ "faces": faces(s.model.reference()) })))
}

async fn decode(State(s): State<Arc<Explorer>>, body: Bytes) -> ApiResult {
    s.requests.fetch_add(1, Ordering::Relaxed);
    let req: DecodeRequest = parse(&body)?;
    blocking(move || {
        let mesh = s.model.decode(&req.code, req.condition.as_deref())?;
        let mut out = json!({ "vertices": vertices(&mesh) });
        if !req.vertices_only {
            out["faces"] = json!(faces(&mesh));
        }
        Ok(Json(out))
    })
    .await
}

async fn grid(State(s): State<Arc<Explorer>>, body: Bytes) -> ApiResult {
    s.requests.fetch_add(1, Ordering::Relaxed);
    let req: GridRequest = parse(&body)?;
    if req.resolution > MAX_GRID_RESOLUTION {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            format!("resolution is limited to {MAX_GRID_RESOLUTION}"),
        ));
    }
    blocking(move || {
        let g = s.model.explore_grid(
            (req.dims[0], req.dims[1]),
            &req.base_code,
            (req.range[0], req.range[1]),
            req.resolution,
            req.condition.as_deref(),
        )?;
        let cells: Vec<Frame> = g
            .decoded
            .codes
            .into_iter()
            .zip(&g.decoded.meshes)
            .map(|(code, m)| Frame {
                code,
                vertices: vertices(m),
            })
            .collect();
        Ok(Json(json!({
            "resolution": g.resolution,
            "faces": faces(s.model.reference()),
            "cells": cells,
        })))
    })
    .await
}

async fn interpolate(State(s): State<Arc<Explorer>>, body: Bytes) -> ApiResult {
    s.requests.fetch_add(1, Ordering::Relaxed);
    let req: InterpolateRequest = parse(&body)?;
    if req.steps > MAX_STEPS {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            format!("steps is limited to {MAX_STEPS}"),
        ));
    }
    blocking(move || {
        let d = s.model.interpolate_latent(
            &req.a_code,
            &req.b_code,
            req.steps,
            req.condition.as_deref(),
        )?;
        let frames: Vec<Frame> = d
            .codes
            .into_iter()
            .zip(&d.meshes)
            .map(|(code, m)| Frame {
                code,
                vertices: vertices(m),
            })
            .collect();
        let mut out = json!({ "frames": frames });
        if !req.vertices_only {
            out["faces"] = json!(faces(s.model.reference()));
        }
        Ok(Json(out))
    })
    .await
}

async fn model_handler(State(s): State<Arc<Explorer>>, Path(k): Path<String>) -> ApiResult {
    s.requests.fetch_add(1, Ordering::Relaxed);
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("no corpus model `{k}`"));
    let corpus = s.corpus.as_ref().ok_or_else(not_found)?;
    let index: usize = k.parse().map_err(|_| not_found())?;
    let mesh = corpus.meshes.get(index).ok_or_else(not_found)?;
    let labels: Vec<&str> = (0..corpus.labels.vocabularies.len())
        .map(|f| corpus.labels.label(index, f))
        .collect();
    Ok(Json(json!({
        "index": index,
        "name": corpus.names[index],
        "labels": labels,
        "held_out": corpus.held_out.contains(&index),
        "mean": s.means[index],
        "vertices": vertices(mesh),
        "faces": faces(mesh),
    })))
}

async fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "unknown endpoint".into())
}

pub fn router(state: Arc<Explorer>) -> Router {
    Router::new()
        .route("/api/info", get(info))
        .route("/api/faces", get(faces_handler))
        .route("/api/decode", post(decode))
        .route("/api/grid", post(grid))
        .route("/api/interpolate", post(interpolate))
        .route("/api/model/{k}", get(model_handler))
        .fallback(not_found)
        .layer(
            CorsLayer::new()
                .allow_origin(Any)
                .allow_methods(Any)
                .allow_headers(Any),
        )
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<Explorer>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("explorer listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

/// Blocking wrapper around [`serve`] with its own runtime.
pub fn serve_blocking(state: Explorer, addr: SocketAddr) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(Arc::new(state), addr))
}
