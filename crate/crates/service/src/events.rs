//! Append-only event log.
//!
//! Every state change is an [`Event`]. The live service and a cold replay run
//! the same [`crate::state::PlatformState::apply`], so a log replayed from
//! empty rebuilds the exact state. On disk the log is JSON lines; a torn
//! final line left by a crash is dropped on open.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use ganimals_core::{
    AnnotationRecord, Characteristic, GanimalId, Genome, ImageRef, LayoutVariant, Procedure,
    WorldId,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    /// Milliseconds, strictly increasing along the log.
    pub timestamp: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedGanimal {
    pub genome: Genome,
    pub image: ImageRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DiscoveryOutcome {
    New {
        genome: Genome,
        image: ImageRef,
        procedure: Procedure,
        fallback: bool,
    },
    Existing {
        ganimal_id: GanimalId,
        characteristic: Characteristic,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    WorldCreated {
        world_id: WorldId,
        layout: LayoutVariant,
        initial_energy: f64,
        seeds: Vec<SeedGanimal>,
    },
    UserAssigned {
        user_id: String,
        world_id: WorldId,
    },
    GanimalDiscovered {
        user_id: String,
        world_id: WorldId,
        outcome: DiscoveryOutcome,
    },
    GanimalBred {
        user_id: String,
        world_id: WorldId,
        parents: [GanimalId; 2],
        genome: Genome,
        image: ImageRef,
        name: Option<String>,
    },
    Named {
        user_id: String,
        ganimal_id: GanimalId,
        name: String,
    },
    Fed {
        user_id: String,
        world_id: WorldId,
        ganimal_id: GanimalId,
        amount: f64,
        /// First feed of a discovery: adopt it into the population first.
        adopt_energy: Option<f64>,
    },
    Annotated {
        record: AnnotationRecord,
    },
    Ticked {
        decay: f64,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::WorldCreated { .. } => "WorldCreated",
            EventKind::UserAssigned { .. } => "UserAssigned",
            EventKind::GanimalDiscovered { .. } => "GanimalDiscovered",
            EventKind::GanimalBred { .. } => "GanimalBred",
            EventKind::Named { .. } => "Named",
            EventKind::Fed { .. } => "Fed",
            EventKind::Annotated { .. } => "Annotated",
            EventKind::Ticked { .. } => "Ticked",
        }
    }
}

pub trait EventLog: Send {
    /// Durably appends a batch; either all lines are written or the call fails.
    fn append(&mut self, events: &[Event]) -> std::io::Result<()>;

    /// Persists a state snapshot covering events up to `seq`.
    fn snapshot(&mut self, _seq: u64, _state_json: &str) -> std::io::Result<()> {
        Ok(())
    }
}

/// In-memory log; clones share the same buffer.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog {
    events: Arc<Mutex<Vec<Event>>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> Vec<Event> {
        self.events.lock().expect("log lock").clone()
    }

    pub fn len(&self) -> usize {
        self.events.lock().expect("log lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EventLog for MemoryLog {
    fn append(&mut self, events: &[Event]) -> std::io::Result<()> {
        self.events
            .lock()
            .expect("log lock")
            .extend_from_slice(events);
        Ok(())
    }
}

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot<S> {
    pub seq: u64,
    pub state_hash: String,
    pub state: S,
}

#[derive(Debug)]
pub struct FileLog {
    file: File,
    dir: PathBuf,
    fsync: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("event log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

impl FileLog {
    /// Opens (creating if needed) `<dir>/events.jsonl` and returns the
    /// recorded events. A torn last line is truncated away; a bad line
    /// anywhere else is an error.
    pub fn open(dir: &Path, fsync: bool) -> Result<(FileLog, Vec<Event>), LogError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let events = if path.exists() {
            read_events(&path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((
            FileLog {
                file,
                dir: dir.to_path_buf(),
                fsync,
            },
            events,
        ))
    }

    /// Latest readable snapshot in `dir`, if any.
    pub fn latest_snapshot<S: for<'de> Deserialize<'de>>(dir: &Path) -> Option<Snapshot<S>> {
        let mut candidates: Vec<(u64, PathBuf)> = fs::read_dir(dir.join(SNAPSHOT_DIR))
            .ok()?
            .filter_map(|e| {
                let path = e.ok()?.path();
                let stem = path.file_name()?.to_str()?;
                let seq = stem
                    .strip_prefix("snapshot-")?
                    .strip_suffix(".json")?
                    .parse()
                    .ok()?;
                Some((seq, path))
            })
            .collect();
        candidates.sort();
        candidates.into_iter().rev().find_map(|(_, path)| {
            let text = fs::read_to_string(path).ok()?;
            serde_json::from_str(&text).ok()
        })
    }
}

fn read_events(path: &Path) -> Result<Vec<Event>, LogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    let mut good_bytes = 0u64;
    let mut pending: Option<(usize, String)> = None;
    for (i, line) in reader.split(b'\n').enumerate() {
        let raw = line?;
        if let Some((line, message)) = pending.take() {
            // The bad line was not the last one.
            return Err(LogError::Corrupt { line, message });
        }
        let text = String::from_utf8_lossy(&raw);
        if text.trim().is_empty() {
            good_bytes += raw.len() as u64 + 1;
            continue;
        }
        match serde_json::from_str::<Event>(&text) {
            Ok(event) => {
                let expected = events.last().map_or(0, |e: &Event| e.seq + 1);
                if event.seq != expected {
                    return Err(LogError::Corrupt {
                        line: i + 1,
                        message: format!("sequence {} where {expected} expected", event.seq),
                    });
                }
                events.push(event);
                good_bytes += raw.len() as u64 + 1;
            }
            Err(e) => pending = Some((i + 1, e.to_string())),
        }
    }
    let len = fs::metadata(path)?.len();
    if good_bytes < len {
        let file = OpenOptions::new().write(true).open(path)?;
        file.set_len(good_bytes)?;
        file.sync_all()?;
    } else if good_bytes > len {
        // Last record is complete but unterminated.
        let mut file = OpenOptions::new().append(true).open(path)?;
        file.write_all(b"\n")?;
        file.sync_all()?;
    }
    Ok(events)
}

impl EventLog for FileLog {
    fn append(&mut self, events: &[Event]) -> std::io::Result<()> {
        let mut buf = Vec::new();
        for event in events {
            serde_json::to_writer(&mut buf, event).map_err(std::io::Error::other)?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.flush()?;
        if self.fsync {
            self.file.sync_data()?;
        }
        Ok(())
    }

    fn snapshot(&mut self, seq: u64, state_json: &str) -> std::io::Result<()> {
        let dir = self.dir.join(SNAPSHOT_DIR);
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("snapshot-{seq:012}.json"));
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, state_json)?;
        fs::rename(tmp, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(seq: u64) -> Event {
        Event {
            seq,
            timestamp: seq * 10,
            kind: EventKind::Ticked { decay: 0.1 },
        }
    }

    #[test]
    fn wire_shape() {
        let json = serde_json::to_value(tick(3)).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"seq": 3, "timestamp": 30, "kind": "Ticked", "payload": {"decay": 0.1}})
        );
    }

    #[test]
    fn file_log_round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let (mut log, existing) = FileLog::open(dir.path(), false).unwrap();
        assert!(existing.is_empty());
        log.append(&[tick(0), tick(1)]).unwrap();
        log.append(&[tick(2)]).unwrap();
        drop(log);

        let path = dir.path().join(LOG_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"seq":3,"timestamp":30,"ki"#).unwrap();
        drop(f);

        let (mut log, events) = FileLog::open(dir.path(), false).unwrap();
        assert_eq!(events, vec![tick(0), tick(1), tick(2)]);
        log.append(&[tick(3)]).unwrap();
        drop(log);
        let (_, events) = FileLog::open(dir.path(), false).unwrap();
        assert_eq!(events.len(), 4);
    }

    #[test]
    fn corruption_before_the_tail_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        let good = serde_json::to_string(&tick(0)).unwrap();
        fs::write(&path, format!("{good}\nnot json\n{good}\n")).unwrap();
        assert!(matches!(
            FileLog::open(dir.path(), false),
            Err(LogError::Corrupt { line: 2, .. })
        ));

        let out_of_order = format!("{good}\n{}\n", serde_json::to_string(&tick(5)).unwrap());
        fs::write(&path, out_of_order).unwrap();
        assert!(matches!(
            FileLog::open(dir.path(), false),
            Err(LogError::Corrupt { line: 2, .. })
        ));
    }

    #[test]
    fn latest_snapshot_wins() {
        let dir = tempfile::tempdir().unwrap();
        let (mut log, _) = FileLog::open(dir.path(), false).unwrap();
        for seq in [4u64, 12, 9] {
            let snap = Snapshot {
                seq,
                state_hash: String::new(),
                state: seq,
            };
            log.snapshot(seq, &serde_json::to_string(&snap).unwrap())
                .unwrap();
        }
        let snap: Snapshot<u64> = FileLog::latest_snapshot(dir.path()).unwrap();
        assert_eq!(snap.seq, 12);
    }
}
