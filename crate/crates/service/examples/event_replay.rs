//! Write a session to an on-disk event log, reopen it, and replay it.
//!
//! cargo run -p ganimals --example event_replay

use ganimals::events::FileLog;
use ganimals::{Platform, PlatformState, ServiceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let config = ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        seed_set_size: 15,
        resolution: 64,
        snapshot_every: 5,
        ..Default::default()
    };

    let platform = Platform::open(config.clone())?;
    for user in ["ada", "bo", "cy"] {
        for _ in 0..4 {
            let d = platform.discover(user)?;
            let _ = platform.feed(user, d.ganimal.ganimal.id);
        }
    }
    platform.tick()?;
    let hash = platform.state_hash()?;
    let events = platform.event_count()?;
    println!("session wrote {events} events, state {hash}");
    drop(platform);

    let reopened = Platform::open(config)?;
    println!(
        "reopened from snapshot + log: {}",
        reopened.state_hash()? == hash
    );

    let (_, log) = FileLog::open(dir.path(), false)?;
    let mut kinds = std::collections::BTreeMap::new();
    for event in &log {
        *kinds.entry(event.kind.name()).or_insert(0) += 1;
    }
    println!("event kinds: {kinds:?}");
    let replayed = PlatformState::replay(&log)?;
    println!("replayed from scratch: {}", replayed.state_hash() == hash);
    Ok(())
}
