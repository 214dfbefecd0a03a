//! The platform: validated operations over [`PlatformState`], each committed
//! as events to the log before its result is returned.
//!
//! One mutex serializes writers and gives the log its total order. Rendering
//! happens outside the lock; after a render the operation re-checks that
//! nothing it depended on moved and retries otherwise.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use ganimals_core::catalogue::Acknowledgment;
use ganimals_core::ecology::assign_user;
use ganimals_core::render::DirImageStore;
use ganimals_core::rng::stable_hash64;
use ganimals_core::sampler::next_discovery;
use ganimals_core::{
    AnnotationRecord, CatalogueError, CategoryPredicate, Characteristic, DiscoveryResult, DrawRng,
    GanimalId, Generation, GeneratorBackend, Genome, GenomeError, GroupComparison, ImageRef,
    ImageStore, LayoutVariant, MemoryImageStore, Metric, MockBackend, MorphologyAnnotation,
    NoiseRule, Procedure, RenderCache, RenderError, SubjectiveRating, Taxonomy, TruncationRule,
    World, WorldId,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ServiceConfig};
use crate::events::{
    DiscoveryOutcome, Event, EventKind, EventLog, FileLog, LogError, MemoryLog, SeedGanimal,
    Snapshot,
};
use crate::state::{ApplyError, Ganimal, PlatformState};
use crate::worker::WorkerBackend;

pub const MAX_NAME_LEN: usize = 64;
pub const MAX_USER_ID_LEN: usize = 128;

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown ganimal {0}")]
    UnknownGanimal(GanimalId),
    #[error("ganimal {0} does not belong to your world")]
    OtherWorld(GanimalId),
    #[error("ganimal {0} is not alive in your world")]
    NotInPopulation(GanimalId),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("event log: {0}")]
    Storage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Replay(#[from] ApplyError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("internal: {0}")]
    Internal(String),
}

pub type Result<T, E = PlatformError> = std::result::Result<T, E>;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// A clock that only moves when told to; used by simulations and tests.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanimalView {
    #[serde(flatten)]
    pub ganimal: Ganimal,
    pub generation: Generation,
    pub permalink: String,
}

impl GanimalView {
    fn of(g: &Ganimal) -> Self {
        GanimalView {
            generation: g.genome.generation(),
            permalink: format!("/g/{}", g.id),
            ganimal: g.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub user_id: String,
    pub world_id: WorldId,
    pub layout: LayoutVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub procedure: Procedure,
    pub fallback: bool,
    /// Set when the ganimal was pulled from a leaderboard.
    pub characteristic: Option<Characteristic>,
    pub world_id: WorldId,
    pub ganimal: GanimalView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedReceipt {
    pub ganimal_id: GanimalId,
    pub world_id: WorldId,
    pub energy: f64,
    pub last_fed_tick: u64,
    pub adopted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationBody {
    #[serde(default)]
    pub morphology: Option<MorphologyAnnotation>,
    #[serde(default)]
    pub ratings: Option<SubjectiveRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub ganimal_id: GanimalId,
    pub mean_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberView {
    pub ganimal: GanimalView,
    pub energy: f64,
    pub last_fed_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldView {
    pub user_id: String,
    pub world_id: WorldId,
    pub layout: LayoutVariant,
    pub tick: u64,
    /// Energy descending.
    pub population: Vec<MemberView>,
    pub leaderboards: BTreeMap<Characteristic, Vec<LeaderboardEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub tick: u64,
    pub removed: BTreeMap<WorldId, Vec<GanimalId>>,
}

struct Inner {
    state: PlatformState,
    log: Box<dyn EventLog>,
    since_snapshot: u64,
    /// Set when the log rejected a write; the state is then ahead of the log.
    poisoned: bool,
}

pub struct Platform {
    config: ServiceConfig,
    taxonomy: Arc<Taxonomy>,
    backend: Arc<dyn GeneratorBackend>,
    images: Arc<dyn ImageStore>,
    cache: RenderCache,
    clock: Arc<dyn Clock>,
    inner: Mutex<Inner>,
}

/// Everything a platform is assembled from.
pub struct Parts {
    pub config: ServiceConfig,
    pub taxonomy: Taxonomy,
    pub backend: Arc<dyn GeneratorBackend>,
    pub images: Arc<dyn ImageStore>,
    pub clock: Arc<dyn Clock>,
    pub log: Box<dyn EventLog>,
    /// State already reconstructed from the log.
    pub state: PlatformState,
}

fn user_key(user: &str) -> u64 {
    stable_hash64("ganimals-user-v1", user)
}

pub fn validate_user_id(user: &str) -> Result<()> {
    let ok = !user.is_empty()
        && user.len() <= MAX_USER_ID_LEN
        && user
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(PlatformError::BadRequest(format!(
            "user ids are 1-{MAX_USER_ID_LEN} characters of [A-Za-z0-9._-]"
        )))
    }
}

fn validate_name(name: &str) -> Result<String> {
    let trimmed = name.trim();
    if trimmed.is_empty() || trimmed.chars().count() > MAX_NAME_LEN {
        return Err(PlatformError::BadRequest(format!(
            "names are 1-{MAX_NAME_LEN} characters"
        )));
    }
    if trimmed.chars().any(char::is_control) {
        return Err(PlatformError::BadRequest(
            "names cannot contain control characters".into(),
        ));
    }
    Ok(trimmed.to_string())
}

pub fn backend_from_config(config: &ServiceConfig) -> Result<Arc<dyn GeneratorBackend>> {
    Ok(match &config.backend_url {
        Some(url) => Arc::new(
            WorkerBackend::new(
                url,
                Duration::from_millis(config.backend_timeout_ms),
                config.max_resolution,
            )
            .map_err(|e| PlatformError::Internal(e.to_string()))?,
        ),
        None => Arc::new(MockBackend {
            max_resolution: config.max_resolution,
        }),
    })
}

impl Platform {
    /// Opens the file-backed platform in `config.data_dir`, replaying the
    /// log (from the newest valid snapshot) and creating the worlds on first
    /// start.
    pub fn open(config: ServiceConfig) -> Result<Platform> {
        let backend = backend_from_config(&config)?;
        Platform::open_with_backend(config, backend, Arc::new(SystemClock))
    }

    pub fn open_with_backend(
        config: ServiceConfig,
        backend: Arc<dyn GeneratorBackend>,
        clock: Arc<dyn Clock>,
    ) -> Result<Platform> {
        config.validate()?;
        let taxonomy = config.taxonomy()?;
        let dir = config.data_dir.clone();
        let state = load_state(&dir, config.fsync)?;
        let (log, _) = FileLog::open(&dir, config.fsync)?;
        let images = DirImageStore::open(dir.join("images"))
            .map_err(|e| PlatformError::Storage(e.to_string()))?;
        Platform::assemble(Parts {
            config,
            taxonomy,
            backend,
            images: Arc::new(images),
            clock,
            log: Box::new(log),
            state,
        })
    }

    /// A platform whose log and images live in memory. Returns a handle on
    /// the log for inspection and replay.
    pub fn in_memory(
        config: ServiceConfig,
        backend: Arc<dyn GeneratorBackend>,
        clock: Arc<dyn Clock>,
    ) -> Result<(Platform, MemoryLog)> {
        config.validate()?;
        let log = MemoryLog::new();
        let platform = Platform::assemble(Parts {
            taxonomy: config.taxonomy()?,
            config,
            backend,
            images: Arc::new(MemoryImageStore::new()),
            clock,
            log: Box::new(log.clone()),
            state: PlatformState::new(),
        })?;
        Ok((platform, log))
    }

    pub fn assemble(parts: Parts) -> Result<Platform> {
        let Parts {
            config,
            taxonomy,
            backend,
            images,
            clock,
            log,
            state,
        } = parts;
        let cache = RenderCache::new(config.resolution, config.retry());
        for g in state.ganimals.values() {
            cache.insert(g.id, g.image.clone());
        }
        let platform = Platform {
            taxonomy: Arc::new(taxonomy),
            backend,
            images,
            cache,
            clock,
            inner: Mutex::new(Inner {
                state,
                log,
                since_snapshot: 0,
                poisoned: false,
            }),
            config,
        };
        platform.bootstrap()?;
        Ok(platform)
    }

    fn bootstrap(&self) -> Result<()> {
        let existing = self.lock()?.state.worlds.len() as u32;
        if existing == self.config.n_worlds {
            return Ok(());
        }
        if existing != 0 {
            return Err(PlatformError::Config(ConfigError::Invalid(format!(
                "log holds {existing} worlds but n_worlds is {}",
                self.config.n_worlds
            ))));
        }
        let sampler = self.config.sampler();
        let mut kinds = Vec::new();
        for i in 0..self.config.n_worlds {
            let mut rng = DrawRng::derive(self.config.master_seed, "world-seed-set", &[i as u64]);
            let layout = LayoutVariant::for_world(i);
            let (_, genomes) = World::create(
                &mut rng,
                &self.taxonomy,
                &sampler,
                WorldId(i),
                layout,
                self.config.seed_set_size,
                self.config.energy.initial,
            )
            .map_err(|e| PlatformError::Internal(e.to_string()))?;
            let mut seeds = Vec::with_capacity(genomes.len());
            for genome in genomes {
                let image = self.render(&genome)?;
                seeds.push(SeedGanimal { genome, image });
            }
            kinds.push(EventKind::WorldCreated {
                world_id: WorldId(i),
                layout,
                initial_energy: self.config.energy.initial,
                seeds,
            });
        }
        let mut inner = self.lock()?;
        self.commit(&mut inner, kinds)?;
        tracing::info!(worlds = self.config.n_worlds, "created worlds");
        Ok(())
    }

    fn lock(&self) -> Result<MutexGuard<'_, Inner>> {
        let inner = self
            .inner
            .lock()
            .map_err(|_| PlatformError::Internal("state lock poisoned".into()))?;
        if inner.poisoned {
            return Err(PlatformError::Storage(
                "an earlier write to the event log failed; restart to recover".into(),
            ));
        }
        Ok(inner)
    }

    fn render(&self, genome: &Genome) -> Result<ImageRef> {
        Ok(self
            .cache
            .render_cached(self.backend.as_ref(), self.images.as_ref(), genome)?)
    }

    /// Applies and logs a batch of events.
    fn commit(&self, inner: &mut Inner, kinds: Vec<EventKind>) -> Result<Vec<Event>> {
        let mut events = Vec::with_capacity(kinds.len());
        let mut scratch_ts = inner.state.last_timestamp;
        for (i, kind) in kinds.into_iter().enumerate() {
            let seq = inner.state.next_seq + i as u64;
            let timestamp = if seq == 0 {
                self.clock.now_ms()
            } else {
                self.clock.now_ms().max(scratch_ts + 1)
            };
            scratch_ts = timestamp;
            events.push(Event {
                seq,
                timestamp,
                kind,
            });
        }
        // Validated by the caller, so a failure here is a bug; check on a
        // copy only for multi-event batches where a later event could fail
        // after an earlier one was applied.
        if events.len() > 1 {
            let mut probe = inner.state.clone();
            for e in &events {
                probe.apply(e)?;
            }
            inner.state = probe;
        } else if let Some(e) = events.first() {
            inner.state.apply(e)?;
        }
        if let Err(e) = inner.log.append(&events) {
            inner.poisoned = true;
            return Err(PlatformError::Storage(e.to_string()));
        }
        inner.since_snapshot += events.len() as u64;
        if self.config.snapshot_every > 0 && inner.since_snapshot >= self.config.snapshot_every {
            inner.since_snapshot = 0;
            let snapshot = Snapshot {
                seq: inner.state.next_seq - 1,
                state_hash: inner.state.state_hash(),
                state: &inner.state,
            };
            let json = serde_json::to_string(&snapshot).expect("state serializes");
            if let Err(e) = inner.log.snapshot(snapshot.seq, &json) {
                tracing::warn!(error = %e, "snapshot failed");
            }
        }
        Ok(events)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn backend(&self) -> &dyn GeneratorBackend {
        self.backend.as_ref()
    }

    /// Runs `f` against a consistent view of the state.
    pub fn read<T>(&self, f: impl FnOnce(&PlatformState) -> T) -> Result<T> {
        Ok(f(&self.lock()?.state))
    }

    pub fn state_hash(&self) -> Result<String> {
        self.read(PlatformState::state_hash)
    }

    pub fn event_count(&self) -> Result<u64> {
        self.read(|s| s.next_seq)
    }

    pub fn image(&self, digest: &str) -> Option<Vec<u8>> {
        self.images.get(digest)
    }

    fn user_world(state: &PlatformState, user: &str) -> Result<WorldId> {
        state
            .users
            .get(user)
            .map(|u| u.world_id)
            .ok_or_else(|| PlatformError::UnknownUser(user.to_string()))
    }

    /// The ganimal, provided it has appeared in `world`.
    fn visible<'s>(
        state: &'s PlatformState,
        world: WorldId,
        gid: &GanimalId,
    ) -> Result<&'s Ganimal> {
        let g = state
            .ganimals
            .get(gid)
            .ok_or(PlatformError::UnknownGanimal(*gid))?;
        if !state.worlds[&world].knows(gid) {
            return Err(PlatformError::OtherWorld(*gid));
        }
        Ok(g)
    }

    /// Idempotent: returns the existing assignment for a known user.
    pub fn assign(&self, user: &str) -> Result<Assignment> {
        validate_user_id(user)?;
        let mut inner = self.lock()?;
        let world_id = match inner.state.users.get(user) {
            Some(u) => u.world_id,
            None => {
                let world_id = assign_user(user, self.config.n_worlds);
                self.commit(
                    &mut inner,
                    vec![EventKind::UserAssigned {
                        user_id: user.to_string(),
                        world_id,
                    }],
                )?;
                world_id
            }
        };
        Ok(Assignment {
            user_id: user.to_string(),
            world_id,
            layout: inner.state.worlds[&world_id].layout(),
        })
    }

    /// Serves the user's next ganimal, assigning a world on first contact.
    pub fn discover(&self, user: &str) -> Result<Discovery> {
        validate_user_id(user)?;
        loop {
            let (index, world_id, result) = {
                let inner = self.lock()?;
                let state = &inner.state;
                let (world_id, index) = match state.users.get(user) {
                    Some(u) => (u.world_id, u.discoveries),
                    None => (assign_user(user, self.config.n_worlds), 0),
                };
                let mut rng = DrawRng::derive(
                    self.config.master_seed,
                    "discover",
                    &[user_key(user), index],
                );
                let result = next_discovery(
                    &mut rng,
                    &self.config.sampler(),
                    &self.taxonomy,
                    &state.worlds[&world_id],
                )
                .map_err(|e| PlatformError::Internal(e.to_string()))?;
                (index, world_id, result)
            };

            let outcome = match result {
                DiscoveryResult::New {
                    genome,
                    procedure,
                    fallback,
                } => {
                    let image = self.render(&genome)?;
                    DiscoveryOutcome::New {
                        genome,
                        image,
                        procedure,
                        fallback,
                    }
                }
                DiscoveryResult::Existing { id, characteristic } => DiscoveryOutcome::Existing {
                    ganimal_id: id,
                    characteristic,
                },
            };

            let mut inner = self.lock()?;
            let current = inner.state.users.get(user).map(|u| u.discoveries);
            if current.unwrap_or(0) != index {
                // A concurrent discover for this user won; draw again.
                continue;
            }
            let mut kinds = Vec::with_capacity(2);
            if current.is_none() {
                kinds.push(EventKind::UserAssigned {
                    user_id: user.to_string(),
                    world_id,
                });
            }
            kinds.push(EventKind::GanimalDiscovered {
                user_id: user.to_string(),
                world_id,
                outcome: outcome.clone(),
            });
            self.commit(&mut inner, kinds)?;

            let (gid, procedure, fallback, characteristic) = match outcome {
                DiscoveryOutcome::New {
                    genome,
                    procedure,
                    fallback,
                    ..
                } => (genome.id(), procedure, fallback, None),
                DiscoveryOutcome::Existing {
                    ganimal_id,
                    characteristic,
                } => (
                    ganimal_id,
                    Procedure::Leaderboard,
                    false,
                    Some(characteristic),
                ),
            };
            return Ok(Discovery {
                procedure,
                fallback,
                characteristic,
                world_id,
                ganimal: GanimalView::of(&inner.state.ganimals[&gid]),
            });
        }
    }

    /// Blends two G1 ganimals from the user's world into a G2.
    pub fn breed(
        &self,
        user: &str,
        parent_a: GanimalId,
        parent_b: GanimalId,
        name: Option<&str>,
    ) -> Result<GanimalView> {
        let name = name.map(validate_name).transpose()?;
        let (world_id, child) = {
            let inner = self.lock()?;
            let state = &inner.state;
            let world_id = Platform::user_world(state, user)?;
            let a = Platform::visible(state, world_id, &parent_a)?;
            let b = Platform::visible(state, world_id, &parent_b)?;
            if parent_a == parent_b {
                return Err(PlatformError::Conflict(
                    "parents are the same ganimal".into(),
                ));
            }
            let child = Genome::breed_quad(
                &a.genome,
                &b.genome,
                NoiseRule::default(),
                TruncationRule::Mean,
            )
            .map_err(|e| match e {
                GenomeError::WrongGeneration { .. } => {
                    PlatformError::Unprocessable(format!("only G1 ganimals can be bred: {e}"))
                }
                GenomeError::IdenticalParents => PlatformError::Conflict(e.to_string()),
                other => PlatformError::BadRequest(other.to_string()),
            })?;
            (world_id, child)
        };
        let image = self.render(&child)?;
        let mut inner = self.lock()?;
        let gid = child.id();
        self.commit(
            &mut inner,
            vec![EventKind::GanimalBred {
                user_id: user.to_string(),
                world_id,
                parents: [parent_a, parent_b],
                genome: child,
                image,
                name,
            }],
        )?;
        Ok(GanimalView::of(&inner.state.ganimals[&gid]))
    }

    /// Feeds a ganimal in the user's world. Feeding a discovery for the first
    /// time adopts it into the population.
    pub fn feed(&self, user: &str, gid: GanimalId) -> Result<FeedReceipt> {
        let mut inner = self.lock()?;
        let world_id = Platform::user_world(&inner.state, user)?;
        let world = &inner.state.worlds[&world_id];
        let adopt_energy = if world.energy(&gid).is_some() {
            None
        } else if world.can_adopt(&gid) {
            Some(self.config.energy.initial)
        } else {
            return Err(PlatformError::NotInPopulation(gid));
        };
        self.commit(
            &mut inner,
            vec![EventKind::Fed {
                user_id: user.to_string(),
                world_id,
                ganimal_id: gid,
                amount: self.config.energy.feed_amount,
                adopt_energy,
            }],
        )?;
        let state = inner.state.worlds[&world_id]
            .energy(&gid)
            .expect("just fed");
        Ok(FeedReceipt {
            ganimal_id: gid,
            world_id,
            energy: state.energy,
            last_fed_tick: state.last_fed_tick,
            adopted: adopt_energy.is_some(),
        })
    }

    pub fn annotate(
        &self,
        user: &str,
        gid: GanimalId,
        body: AnnotationBody,
    ) -> Result<Acknowledgment> {
        let mut inner = self.lock()?;
        let world_id = Platform::user_world(&inner.state, user)?;
        Platform::visible(&inner.state, world_id, &gid)?;
        let record = AnnotationRecord {
            user_id: user.to_string(),
            ganimal_id: gid,
            world_id,
            timestamp: self.clock.now_ms().max(inner.state.last_timestamp + 1),
            morphology: body.morphology,
            ratings: body.ratings,
        };
        inner
            .state
            .annotations
            .validate(&record)
            .map_err(|e| PlatformError::BadRequest(e.to_string()))?;
        let ack = Acknowledgment {
            ganimal_id: gid,
            metrics: record
                .ratings
                .as_ref()
                .map(|r| r.answered().map(|(m, _)| m).collect())
                .unwrap_or_default(),
            features: record
                .morphology
                .as_ref()
                .map(|m| m.answered().map(|(f, _)| f).collect())
                .unwrap_or_default(),
        };
        self.commit(&mut inner, vec![EventKind::Annotated { record }])?;
        Ok(ack)
    }

    pub fn name(&self, user: &str, gid: GanimalId, name: &str) -> Result<GanimalView> {
        let name = validate_name(name)?;
        let mut inner = self.lock()?;
        let world_id = Platform::user_world(&inner.state, user)?;
        Platform::visible(&inner.state, world_id, &gid)?;
        self.commit(
            &mut inner,
            vec![EventKind::Named {
                user_id: user.to_string(),
                ganimal_id: gid,
                name,
            }],
        )?;
        Ok(GanimalView::of(&inner.state.ganimals[&gid]))
    }

    /// Advances every world by one tick.
    pub fn tick(&self) -> Result<TickReport> {
        let mut inner = self.lock()?;
        let before: BTreeMap<WorldId, Vec<GanimalId>> = inner
            .state
            .worlds
            .iter()
            .map(|(id, w)| (*id, w.population().keys().copied().collect()))
            .collect();
        self.commit(
            &mut inner,
            vec![EventKind::Ticked {
                decay: self.config.energy.decay,
            }],
        )?;
        let removed = before
            .into_iter()
            .map(|(id, members)| {
                let world = &inner.state.worlds[&id];
                let gone = members
                    .into_iter()
                    .filter(|g| world.energy(g).is_none())
                    .collect();
                (id, gone)
            })
            .collect();
        let tick = inner
            .state
            .worlds
            .values()
            .next()
            .map_or(0, World::tick_count);
        Ok(TickReport { tick, removed })
    }

    /// Permalink payload.
    pub fn ganimal(&self, gid: &GanimalId) -> Result<GanimalView> {
        self.read(|s| s.ganimals.get(gid).map(GanimalView::of))?
            .ok_or(PlatformError::UnknownGanimal(*gid))
    }

    pub fn world_view(&self, user: &str) -> Result<WorldView> {
        let inner = self.lock()?;
        let state = &inner.state;
        let world_id = Platform::user_world(state, user)?;
        let world = &state.worlds[&world_id];
        let population = world
            .promoted()
            .into_iter()
            .map(|(gid, e)| MemberView {
                ganimal: GanimalView::of(&state.ganimals[&gid]),
                energy: e.energy,
                last_fed_tick: e.last_fed_tick,
            })
            .collect();
        let leaderboards = Characteristic::ALL
            .into_iter()
            .map(|ch| {
                (
                    ch,
                    leaderboard_entries(state, world_id, ch, self.config.leaderboard_k),
                )
            })
            .collect();
        Ok(WorldView {
            user_id: user.to_string(),
            world_id,
            layout: world.layout(),
            tick: world.tick_count(),
            population,
            leaderboards,
        })
    }

    pub fn leaderboard(
        &self,
        user: &str,
        characteristic: Characteristic,
    ) -> Result<Vec<LeaderboardEntry>> {
        let inner = self.lock()?;
        let world_id = Platform::user_world(&inner.state, user)?;
        Ok(leaderboard_entries(
            &inner.state,
            world_id,
            characteristic,
            self.config.leaderboard_k,
        ))
    }

    /// Global comparison over every world's annotations.
    pub fn stats(&self, metric: &str, predicate: &str) -> Result<GroupComparison> {
        let metric: Metric = metric
            .parse()
            .map_err(|e: CatalogueError| PlatformError::BadRequest(e.to_string()))?;
        let predicate: CategoryPredicate = predicate
            .parse()
            .map_err(|e: CatalogueError| PlatformError::BadRequest(e.to_string()))?;
        self.read(|s| s.annotations.compare_by(metric, predicate, &self.taxonomy))?
            .map_err(|e| match e {
                CatalogueError::InsufficientData { .. } => PlatformError::Conflict(e.to_string()),
                other => PlatformError::BadRequest(other.to_string()),
            })
    }
}

fn leaderboard_entries(
    state: &PlatformState,
    world_id: WorldId,
    characteristic: Characteristic,
    limit: usize,
) -> Vec<LeaderboardEntry> {
    state
        .leaderboard(world_id, characteristic, limit)
        .into_iter()
        .enumerate()
        .map(|(i, (ganimal_id, mean_rating))| LeaderboardEntry {
            rank: i + 1,
            ganimal_id,
            mean_rating,
        })
        .collect()
}

/// Rebuilds state from `dir`: newest consistent snapshot, then the log tail.
pub fn load_state(dir: &Path, fsync: bool) -> Result<PlatformState> {
    let (_, events) = FileLog::open(dir, fsync)?;
    let snapshot = FileLog::latest_snapshot::<PlatformState>(dir).filter(|s| {
        (s.seq as usize) < events.len()
            && s.state.next_seq == s.seq + 1
            && s.state.state_hash() == s.state_hash
    });
    let (mut state, from) = match snapshot {
        Some(s) => (s.state, s.seq as usize + 1),
        None => (PlatformState::new(), 0),
    };
    for event in &events[from..] {
        state.apply(event)?;
    }
    Ok(state)
}
