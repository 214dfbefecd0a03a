//! JSON API over a shared [`Platform`].
//!
//! | route | operation |
//! |---|---|
//! | `GET /healthz` | liveness plus backend model |
//! | `POST /api/users/{user}/assign` | world assignment |
//! | `POST /api/users/{user}/discover` | next ganimal |
//! | `POST /api/users/{user}/breed` | `{parent_a, parent_b, name?}` |
//! | `POST /api/users/{user}/feed/{id}` | feed or adopt |
//! | `POST /api/users/{user}/annotate/{id}` | `{morphology?, ratings?}` |
//! | `POST /api/users/{user}/name/{id}` | `{name}` |
//! | `GET /api/users/{user}/world` | population and leaderboards |
//! | `GET /api/users/{user}/leaderboards/{characteristic}` | one board |
//! | `GET /api/stats?metric=&predicate=` | global group comparison |
//! | `POST /api/tick` | advance every world |
//! | `GET /g/{id}` | permalink |
//! | `GET /images/{digest}.png` | image bytes |

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ganimals_core::{Characteristic, GanimalId, RenderError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::platform::{AnnotationBody, Platform, PlatformError};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<PlatformError> for ApiError {
    fn from(e: PlatformError) -> Self {
        let status = match &e {
            PlatformError::UnknownUser(_)
            | PlatformError::UnknownGanimal(_)
            | PlatformError::NotInPopulation(_) => StatusCode::NOT_FOUND,
            PlatformError::OtherWorld(_) => StatusCode::FORBIDDEN,
            PlatformError::BadRequest(_) => StatusCode::BAD_REQUEST,
            PlatformError::Conflict(_) => StatusCode::CONFLICT,
            PlatformError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            PlatformError::Render(RenderError::BackendUnavailable { .. }) => {
                StatusCode::SERVICE_UNAVAILABLE
            }
            PlatformError::Render(RenderError::RenderRejected(_)) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs a blocking platform call off the async workers.
async fn call<T, F>(platform: &Arc<Platform>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Platform) -> Result<T, PlatformError> + Send + 'static,
{
    let platform = Arc::clone(platform);
    tokio::task::spawn_blocking(move || f(&platform))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
        .map_err(ApiError::from)
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn parse_id(raw: &str) -> Result<GanimalId, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("`{raw}` is not a ganimal id")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreedBody {
    pub parent_a: GanimalId,
    pub parent_b: GanimalId,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NameBody {
    pub name: String,
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    metric: Option<String>,
    predicate: Option<String>,
}

async fn healthz(State(p): State<Arc<Platform>>) -> Json<serde_json::Value> {
    let model = tokio::task::spawn_blocking(move || p.backend().capabilities().model)
        .await
        .unwrap_or_else(|_| "unknown".into());
    Json(json!({ "status": "ok", "model": model }))
}

async fn assign(State(p): State<Arc<Platform>>, Path(user): Path<String>) -> impl IntoResponse {
    call(&p, move |p| p.assign(&user)).await
}

async fn discover(State(p): State<Arc<Platform>>, Path(user): Path<String>) -> impl IntoResponse {
    call(&p, move |p| p.discover(&user)).await
}

async fn breed(
    State(p): State<Arc<Platform>>,
    Path(user): Path<String>,
    body: Bytes,
) -> impl IntoResponse {
    let body: BreedBody = parse_body(&body)?;
    call(&p, move |p| {
        p.breed(&user, body.parent_a, body.parent_b, body.name.as_deref())
    })
    .await
}

async fn feed(
    State(p): State<Arc<Platform>>,
    Path((user, id)): Path<(String, String)>,
) -> impl IntoResponse {
    let gid = parse_id(&id)?;
    call(&p, move |p| p.feed(&user, gid)).await
}

async fn annotate(
    State(p): State<Arc<Platform>>,
    Path((user, id)): Path<(String, String)>,
    body: Bytes,
) -> impl IntoResponse {
    let gid = parse_id(&id)?;
    let body: AnnotationBody = parse_body(&body)?;
    call(&p, move |p| p.annotate(&user, gid, body)).await
}

async fn name(
    State(p): State<Arc<Platform>>,
    Path((user, id)): Path<(String, String)>,
    body: Bytes,
) -> impl IntoResponse {
    let gid = parse_id(&id)?;
    let body: NameBody = parse_body(&body)?;
    call(&p, move |p| p.name(&user, gid, &body.name)).await
}

async fn world(State(p): State<Arc<Platform>>, Path(user): Path<String>) -> impl IntoResponse {
    call(&p, move |p| p.world_view(&user)).await
}

async fn leaderboard(
    State(p): State<Arc<Platform>>,
    Path((user, characteristic)): Path<(String, String)>,
) -> impl IntoResponse {
    let ch: Characteristic = characteristic
        .parse()
        .map_err(|_| ApiError::bad_request(format!("unknown characteristic `{characteristic}`")))?;
    call(&p, move |p| p.leaderboard(&user, ch)).await
}

async fn stats(State(p): State<Arc<Platform>>, Query(q): Query<StatsQuery>) -> impl IntoResponse {
    let metric = q
        .metric
        .ok_or_else(|| ApiError::bad_request("missing `metric`"))?;
    let predicate = q
        .predicate
        .ok_or_else(|| ApiError::bad_request("missing `predicate`"))?;
    call(&p, move |p| p.stats(&metric, &predicate)).await
}

async fn tick(State(p): State<Arc<Platform>>) -> impl IntoResponse {
    call(&p, |p| p.tick()).await
}

async fn permalink(State(p): State<Arc<Platform>>, Path(id): Path<String>) -> impl IntoResponse {
    let gid = parse_id(&id).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.message))?;
    call(&p, move |p| p.ganimal(&gid)).await
}

async fn image(State(p): State<Arc<Platform>>, Path(file): Path<String>) -> Response {
    let Some(digest) = file.strip_suffix(".png") else {
        return ApiError::new(StatusCode::NOT_FOUND, "no such image").into_response();
    };
    let digest = digest.to_ascii_lowercase();
    match tokio::task::spawn_blocking(move || p.image(&digest)).await {
        Ok(Some(bytes)) => (
            [
                (header::CONTENT_TYPE, "image/png"),
                (header::CACHE_CONTROL, "public, max-age=31536000, immutable"),
            ],
            bytes,
        )
            .into_response(),
        _ => ApiError::new(StatusCode::NOT_FOUND, "no such image").into_response(),
    }
}

pub fn router(platform: Arc<Platform>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/users/{user}/assign", post(assign))
        .route("/api/users/{user}/discover", post(discover))
        .route("/api/users/{user}/breed", post(breed))
        .route("/api/users/{user}/feed/{id}", post(feed))
        .route("/api/users/{user}/annotate/{id}", post(annotate))
        .route("/api/users/{user}/name/{id}", post(name))
        .route("/api/users/{user}/world", get(world))
        .route(
            "/api/users/{user}/leaderboards/{characteristic}",
            get(leaderboard),
        )
        .route("/api/stats", get(stats))
        .route("/api/tick", post(tick))
        .route("/g/{id}", get(permalink))
        .route("/images/{file}", get(image))
        .with_state(platform)
}

/// Serves until ctrl-c, ticking every `tick_interval_secs` when non-zero.
pub async fn serve(
    platform: Arc<Platform>,
    listener: tokio::net::TcpListener,
) -> std::io::Result<()> {
    let interval = platform.config().tick_interval_secs;
    if interval > 0 {
        let ticker = Arc::clone(&platform);
        tokio::spawn(async move {
            let mut timer = tokio::time::interval(std::time::Duration::from_secs(interval));
            timer.tick().await;
            loop {
                timer.tick().await;
                let p = Arc::clone(&ticker);
                match tokio::task::spawn_blocking(move || p.tick()).await {
                    Ok(Ok(report)) => tracing::info!(tick = report.tick, "world tick"),
                    Ok(Err(e)) => tracing::error!(error = %e, "tick failed"),
                    Err(e) => tracing::error!(error = %e, "tick task failed"),
                }
            }
        });
    }
    axum::serve(listener, router(platform))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
