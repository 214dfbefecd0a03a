//! The render-worker protocol over HTTP.
//!
//! [`WorkerBackend`] is the client used when `backend_url` is configured.
//! [`worker_router`] serves any [`GeneratorBackend`] under the same
//! protocol, which makes the mock usable as a stand-in worker process.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ganimals_core::render::png_dimensions;
use ganimals_core::{BackendError, Capabilities, GeneratorBackend, RenderRequest, RenderedImage};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model: String,
}

pub struct WorkerBackend {
    base_url: String,
    client: reqwest::blocking::Client,
    max_resolution: u32,
}

impl WorkerBackend {
    /// Must be created and used outside an async runtime thread.
    pub fn new(
        base_url: &str,
        timeout: Duration,
        max_resolution: u32,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(WorkerBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            max_resolution,
        })
    }

    pub fn health(&self) -> Result<Health, BackendError> {
        let response = self
            .client
            .get(format!("{}/healthz", self.base_url))
            .send()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(BackendError::Unavailable(format!(
                "healthz returned {}",
                response.status()
            )));
        }
        let body = response
            .bytes()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        serde_json::from_slice(&body).map_err(|e| BackendError::Unavailable(e.to_string()))
    }
}

impl GeneratorBackend for WorkerBackend {
    fn render(&self, request: &RenderRequest) -> Result<RenderedImage, BackendError> {
        let body = serde_json::to_vec(&request.to_wire()).expect("json");
        let response = self
            .client
            .post(format!("{}/render", self.base_url))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body)
            .send()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = response.status();
        let bytes = response
            .bytes()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        match status.as_u16() {
            200 => {
                let (width, height) = png_dimensions(&bytes).map_err(|e| {
                    BackendError::Rejected(format!("worker sent an invalid PNG: {e}"))
                })?;
                if (width, height) != (request.resolution, request.resolution) {
                    return Err(BackendError::Rejected(format!(
                        "worker sent {width}x{height}, asked for {0}x{0}",
                        request.resolution
                    )));
                }
                Ok(RenderedImage {
                    png: bytes.to_vec(),
                    width,
                    height,
                })
            }
            422 => {
                let reason = serde_json::from_slice::<serde_json::Value>(&bytes)
                    .ok()
                    .and_then(|v| v["error"].as_str().map(str::to_string))
                    .unwrap_or_else(|| String::from_utf8_lossy(&bytes).into_owned());
                Err(BackendError::Rejected(reason))
            }
            s if (400..500).contains(&s) => {
                Err(BackendError::Rejected(format!("worker returned {status}")))
            }
            _ => Err(BackendError::Unavailable(format!(
                "worker returned {status}"
            ))),
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            model: self
                .health()
                .map(|h| h.model)
                .unwrap_or_else(|_| "unreachable".to_string()),
            max_resolution: self.max_resolution,
            supports_blend: true,
        }
    }
}

fn unprocessable(reason: String) -> Response {
    (
        StatusCode::UNPROCESSABLE_ENTITY,
        Json(json!({ "error": reason })),
    )
        .into_response()
}

async fn render_handler(State(backend): State<Arc<dyn GeneratorBackend>>, body: Bytes) -> Response {
    let value: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return unprocessable(format!("body is not JSON: {e}")),
    };
    let request = match RenderRequest::from_wire(&value) {
        Ok(r) => r,
        Err(e) => return unprocessable(e.to_string()),
    };
    let result = tokio::task::spawn_blocking(move || backend.render(&request)).await;
    match result {
        Ok(Ok(image)) => ([(header::CONTENT_TYPE, "image/png")], image.png).into_response(),
        Ok(Err(BackendError::Rejected(reason))) => unprocessable(reason),
        Ok(Err(BackendError::Unavailable(reason))) => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "error": reason })),
        )
            .into_response(),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({ "error": e.to_string() })),
        )
            .into_response(),
    }
}

async fn health_handler(State(backend): State<Arc<dyn GeneratorBackend>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model: backend.capabilities().model,
    })
}

/// `POST /render` and `GET /healthz` over `backend`.
pub fn worker_router(backend: Arc<dyn GeneratorBackend>) -> Router {
    Router::new()
        .route("/render", post(render_handler))
        .route("/healthz", get(health_handler))
        .with_state(backend)
}
