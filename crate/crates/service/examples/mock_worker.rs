//! Run the procedural mock as a standalone render worker, then talk to it
//! through the worker client and point a platform at it.
//!
//! cargo run -p ganimals --example mock_worker
//! cargo run -p ganimals --example mock_worker -- --serve 127.0.0.1:8090

use std::sync::Arc;
use std::time::Duration;

use ganimals::platform::{backend_from_config, SystemClock};
use ganimals::{worker_router, Platform, ServiceConfig, WorkerBackend};
use ganimals_core::{GeneratorBackend, Genome, MockBackend, RenderRequest, Taxonomy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let serve_only = args.get(1).map(String::as_str) == Some("--serve");
    let bind = args.get(2).cloned().unwrap_or_else(|| "127.0.0.1:0".into());

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(&bind))?;
    let addr = listener.local_addr()?;
    let router = worker_router(Arc::new(MockBackend::default()));
    if serve_only {
        println!("mock worker on http://{addr} (POST /render, GET /healthz)");
        runtime.block_on(async { axum::serve(listener, router).await })?;
        return Ok(());
    }
    runtime.spawn(async move { axum::serve(listener, router).await });

    let url = format!("http://{addr}");
    let client = WorkerBackend::new(&url, Duration::from_secs(5), 1024)?;
    let health = client.health()?;
    println!("worker {url}: {} ({})", health.status, health.model);

    let taxonomy = Taxonomy::bundled();
    let genome = Genome::pair(&taxonomy, 151, 327, 0.5, 5)?;
    let request = RenderRequest::from_genome(&genome, 64);
    let image = client.render(&request)?;
    let local = MockBackend::default().render(&request)?;
    println!(
        "rendered {}x{} over HTTP, identical to in-process: {}",
        image.width,
        image.height,
        image == local
    );

    let config = ServiceConfig {
        backend_url: Some(url),
        seed_set_size: 10,
        ..Default::default()
    };
    let backend = backend_from_config(&config)?;
    let (platform, _log) = Platform::in_memory(config, backend, Arc::new(SystemClock))?;
    let found = platform.discover("worker-demo")?;
    println!(
        "platform discovered {} via {:?}, image {}",
        found.ganimal.ganimal.id, found.procedure, found.ganimal.ganimal.image.uri
    );
    Ok(())
}
