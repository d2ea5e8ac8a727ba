//! Read-only HTTP API over one loaded checkpoint.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::query::{mesh_query, slice_query, MeshRequest, SliceRequest};
use crate::{encode_mesh, Checkpoint, ServiceError};

pub const DEFAULT_MAX_RESOLUTION: usize = 256;

#[derive(Debug)]
pub struct AppState {
    pub checkpoint: Checkpoint,
    pub max_resolution: usize,
}

#[derive(Debug, Serialize)]
struct ModelInfo {
    #[serde(rename = "N")]
    layers: usize,
    d_h: usize,
    d_l: usize,
    #[serde(rename = "B_schedule")]
    bandwidth_schedule: Vec<f64>,
    conditioning: &'static str,
    levels: usize,
    shape_names: Vec<String>,
    max_resolution: usize,
}

struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ServiceError::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ServiceError::Invalid(_) | ServiceError::Network(_) | ServiceError::Meshing(_) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let message = if status == StatusCode::INTERNAL_SERVER_ERROR {
            "internal error".to_string()
        } else {
            self.0.to_string()
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError(ServiceError::Invalid(format!("malformed request body: {}", e.body_text()))))
}

async fn blocking<T: Send + 'static>(
    work: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError(ServiceError::Io(std::io::Error::other(e))))?
        .map_err(ApiError)
}

async fn model_info(State(state): State<Arc<AppState>>) -> Json<ModelInfo> {
    let params = &state.checkpoint.params;
    Json(ModelInfo {
        layers: params.config.layers,
        d_h: params.config.hidden,
        d_l: params.config.latent,
        bandwidth_schedule: params.bounds().as_slice().to_vec(),
        conditioning: params.conditioning().as_str(),
        levels: params.config.heads(),
        shape_names: state.checkpoint.shape_names.clone(),
        max_resolution: state.max_resolution,
    })
}

async fn shapes(State(state): State<Arc<AppState>>) -> Json<Vec<usize>> {
    Json((0..state.checkpoint.codebook.len()).collect())
}

async fn mesh(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<MeshRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let result = blocking(move || mesh_query(&state.checkpoint, &req, state.max_resolution)).await?;
    let mut response = (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"))],
        Bytes::from(encode_mesh(&result.mesh)),
    )
        .into_response();
    let headers = response.headers_mut();
    headers.insert("evals", HeaderValue::from(result.stats.network_evaluations));
    if let Some(coarse) = result.coarse_stats {
        headers.insert("coarse-evals", HeaderValue::from(coarse.network_evaluations));
    }
    Ok(response)
}

async fn slice(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<SliceRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let res = req.res;
    let values = blocking(move || slice_query(&state.checkpoint, &req, state.max_resolution)).await?;
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let mut response = (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"))],
        Bytes::from(bytes),
    )
        .into_response();
    response.headers_mut().insert("resolution", HeaderValue::from(res));
    Ok(response)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/model/info", get(model_info))
        .route("/shapes", get(shapes))
        .route("/mesh", post(mesh))
        .route("/slice", post(slice))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(state: AppState, port: u16) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}
