//! Serve the HTTP API over an in-memory platform and walk through one
//! user's session with plain HTTP calls.
//!
//! cargo run -p ganimals --example api_tour

use std::sync::Arc;

use ganimals::platform::SystemClock;
use ganimals::{Platform, ServiceConfig};
use ganimals_core::MockBackend;
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig {
        seed_set_size: 12,
        resolution: 64,
        tick_interval_secs: 0,
        ..Default::default()
    };
    let (platform, _log) = Platform::in_memory(
        config,
        Arc::new(MockBackend::default()),
        Arc::new(SystemClock),
    )?;
    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    runtime.spawn(ganimals::http::serve(Arc::new(platform), listener));

    let http = reqwest::blocking::Client::new();
    let call = |method: &str,
                path: &str,
                body: Option<Value>|
     -> Result<Value, Box<dyn std::error::Error>> {
        let url = format!("{base}{path}");
        let request = match method {
            "GET" => http.get(url),
            _ => http
                .post(url)
                .header("content-type", "application/json")
                .body(body.map(|b| b.to_string()).unwrap_or_default()),
        };
        let response = request.send()?;
        let status = response.status();
        let value: Value = serde_json::from_str(&response.text()?)?;
        println!("{method} {path} -> {status}");
        Ok(value)
    };

    let user = "/api/users/tour";
    let assigned = call("POST", &format!("{user}/assign"), None)?;
    println!(
        "  world {} layout {}",
        assigned["world_id"], assigned["layout"]
    );
    let found = call("POST", &format!("{user}/discover"), None)?;
    let id = found["ganimal"]["id"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    println!("  {} via {}", id, found["procedure"]);
    let fed = call("POST", &format!("{user}/feed/{id}"), None)?;
    println!("  adopted {} energy {}", fed["adopted"], fed["energy"]);
    call(
        "POST",
        &format!("{user}/annotate/{id}"),
        Some(json!({"ratings": {"cute": 7}})),
    )?;
    let board = call("GET", &format!("{user}/leaderboards/cute"), None)?;
    println!("  cute board: {board}");

    let world = call("GET", &format!("{user}/world"), None)?;
    let members: Vec<&str> = world["population"]
        .as_array()
        .map(|m| {
            m.iter()
                .filter_map(|m| m["ganimal"]["id"].as_str())
                .collect()
        })
        .unwrap_or_default();
    println!("  population of {}", members.len());
    for pair in members.windows(2) {
        let child = call(
            "POST",
            &format!("{user}/breed"),
            Some(json!({"parent_a": pair[0], "parent_b": pair[1], "name": "Tourling"})),
        )?;
        if let Some(link) = child["permalink"].as_str() {
            let page = call("GET", link, None)?;
            println!("  {} {} at {link}", page["generation"], page["name"]);
            break;
        }
        println!("  {}", child["error"]);
    }
    Ok(())
}
