#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use ganimals::platform::ManualClock;
use ganimals::{MemoryLog, Platform, ServiceConfig};
use ganimals_core::ecology::assign_user;
use ganimals_core::{MockBackend, WorldId};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn small_config() -> ServiceConfig {
    ServiceConfig {
        n_worlds: 4,
        seed_set_size: 12,
        resolution: 32,
        master_seed: 11,
        tick_interval_secs: 0,
        ..Default::default()
    }
}

pub struct App {
    pub router: Router,
    pub platform: Arc<Platform>,
    pub log: MemoryLog,
    pub clock: Arc<ManualClock>,
}

pub fn app_with(config: ServiceConfig) -> App {
    let clock = Arc::new(ManualClock::new(1_000));
    let backend = Arc::new(MockBackend::default());
    let (platform, log) = Platform::in_memory(config, backend, clock.clone()).unwrap();
    let platform = Arc::new(platform);
    App {
        router: ganimals::http::router(platform.clone()),
        platform,
        log,
        clock,
    }
}

pub fn app() -> App {
    app_with(small_config())
}

/// First user id of the form `user-N` that lands in `world`.
pub fn user_in(world: u32, n_worlds: u32) -> String {
    (0..)
        .map(|i| format!("user-{i}"))
        .find(|u| assign_user(u, n_worlds) == WorldId(world))
        .unwrap()
}

pub async fn send(
    router: &Router,
    method: &str,
    uri: &str,
    body: Option<&str>,
) -> (StatusCode, Value) {
    let (status, bytes) = send_raw(router, method, uri, body).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::Null)
    };
    (status, value)
}

pub async fn send_raw(
    router: &Router,
    method: &str,
    uri: &str,
    body: Option<&str>,
) -> (StatusCode, Vec<u8>) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.unwrap_or("").to_string()))
        .unwrap();
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}
