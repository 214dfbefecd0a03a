//! Platform state and the single function that mutates it.

use std::collections::BTreeMap;

use ganimals_core::{
    AnnotationStore, Characteristic, GanimalId, Generation, Genome, ImageRef, LayoutVariant,
    Metric, World, WorldId,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::events::{DiscoveryOutcome, Event, EventKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ganimal {
    pub id: GanimalId,
    pub genome: Genome,
    pub image: ImageRef,
    pub name: Option<String>,
    /// Empty for discoveries, the two parents for bred ganimals.
    pub lineage: Vec<GanimalId>,
    pub world_id: WorldId,
    pub created_tick: u64,
    pub creator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub world_id: WorldId,
    /// Number of discoveries served; indexes the user's sampling stream.
    pub discoveries: u64,
}

#[derive(Debug, Error, PartialEq)]
#[error("event {seq} ({kind}) cannot be applied: {reason}")]
pub struct ApplyError {
    pub seq: u64,
    pub kind: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlatformState {
    pub next_seq: u64,
    pub last_timestamp: u64,
    pub worlds: BTreeMap<WorldId, World>,
    pub users: BTreeMap<String, UserState>,
    pub ganimals: BTreeMap<GanimalId, Ganimal>,
    pub annotations: AnnotationStore,
}

impl PlatformState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, ApplyError> {
        let mut state = PlatformState::new();
        for event in events {
            state.apply(event)?;
        }
        Ok(state)
    }

    /// SHA-256 over the canonical JSON encoding (all maps are ordered).
    pub fn state_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn world(&self, id: WorldId) -> Option<&World> {
        self.worlds.get(&id)
    }

    fn world_mut(&mut self, id: WorldId) -> Result<&mut World, String> {
        self.worlds
            .get_mut(&id)
            .ok_or_else(|| format!("world {id} does not exist"))
    }

    fn user_world(&self, user: &str, world: WorldId) -> Result<(), String> {
        match self.users.get(user) {
            Some(u) if u.world_id == world => Ok(()),
            Some(u) => Err(format!(
                "user {user} lives in world {}, not {world}",
                u.world_id
            )),
            None => Err(format!("user {user} is not assigned")),
        }
    }

    fn register(&mut self, ganimal: Ganimal) {
        self.annotations.register(&ganimal.genome);
        self.ganimals.entry(ganimal.id).or_insert(ganimal);
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), ApplyError> {
        let fail = |reason: String| ApplyError {
            seq: event.seq,
            kind: event.kind.name(),
            reason,
        };
        if event.seq != self.next_seq {
            return Err(fail(format!("expected sequence {}", self.next_seq)));
        }
        if event.seq > 0 && event.timestamp <= self.last_timestamp {
            return Err(fail("timestamp does not increase".into()));
        }
        self.apply_kind(&event.kind).map_err(fail)?;
        self.next_seq += 1;
        self.last_timestamp = event.timestamp;
        Ok(())
    }

    fn apply_kind(&mut self, kind: &EventKind) -> Result<(), String> {
        match kind {
            EventKind::WorldCreated {
                world_id,
                layout,
                initial_energy,
                seeds,
            } => {
                if self.worlds.contains_key(world_id) {
                    return Err(format!("world {world_id} already exists"));
                }
                let ids: Vec<GanimalId> = seeds.iter().map(|s| s.genome.id()).collect();
                let world = World::from_seed_set(*world_id, *layout, ids, *initial_energy);
                for seed in seeds {
                    self.register(Ganimal {
                        id: seed.genome.id(),
                        genome: seed.genome.clone(),
                        image: seed.image.clone(),
                        name: None,
                        lineage: Vec::new(),
                        world_id: *world_id,
                        created_tick: 0,
                        creator: None,
                    });
                }
                self.worlds.insert(*world_id, world);
            }
            EventKind::UserAssigned { user_id, world_id } => {
                if !self.worlds.contains_key(world_id) {
                    return Err(format!("world {world_id} does not exist"));
                }
                if self.users.contains_key(user_id) {
                    return Err(format!("user {user_id} already assigned"));
                }
                self.users.insert(
                    user_id.clone(),
                    UserState {
                        world_id: *world_id,
                        discoveries: 0,
                    },
                );
            }
            EventKind::GanimalDiscovered {
                user_id,
                world_id,
                outcome,
            } => {
                self.user_world(user_id, *world_id)?;
                match outcome {
                    DiscoveryOutcome::New { genome, image, .. } => {
                        let id = genome.id();
                        let world = self.world_mut(*world_id)?;
                        let tick = world.tick_count();
                        world.introduce(id);
                        self.register(Ganimal {
                            id,
                            genome: genome.clone(),
                            image: image.clone(),
                            name: None,
                            lineage: Vec::new(),
                            world_id: *world_id,
                            created_tick: tick,
                            creator: Some(user_id.clone()),
                        });
                    }
                    DiscoveryOutcome::Existing { ganimal_id, .. } => {
                        if !self.world_mut(*world_id)?.knows(ganimal_id) {
                            return Err(format!("{ganimal_id} is not in world {world_id}"));
                        }
                    }
                }
                self.users.get_mut(user_id).expect("checked").discoveries += 1;
            }
            EventKind::GanimalBred {
                user_id,
                world_id,
                parents,
                genome,
                image,
                name,
            } => {
                self.user_world(user_id, *world_id)?;
                let world = self.world_mut(*world_id)?;
                if let Some(p) = parents.iter().find(|p| !world.knows(p)) {
                    return Err(format!("parent {p} is not in world {world_id}"));
                }
                if genome.generation() != Generation::G2 {
                    return Err("bred ganimals are G2".into());
                }
                let id = genome.id();
                let tick = world.tick_count();
                world.introduce(id);
                self.register(Ganimal {
                    id,
                    genome: genome.clone(),
                    image: image.clone(),
                    name: None,
                    lineage: parents.to_vec(),
                    world_id: *world_id,
                    created_tick: tick,
                    creator: Some(user_id.clone()),
                });
                if let Some(name) = name {
                    self.ganimals.get_mut(&id).expect("registered").name = Some(name.clone());
                }
            }
            EventKind::Named {
                ganimal_id, name, ..
            } => {
                let g = self
                    .ganimals
                    .get_mut(ganimal_id)
                    .ok_or_else(|| format!("unknown ganimal {ganimal_id}"))?;
                g.name = Some(name.clone());
            }
            EventKind::Fed {
                user_id,
                world_id,
                ganimal_id,
                amount,
                adopt_energy,
            } => {
                self.user_world(user_id, *world_id)?;
                let world = self.world_mut(*world_id)?;
                if let Some(energy) = adopt_energy {
                    world
                        .adopt(*ganimal_id, *energy)
                        .map_err(|e| e.to_string())?;
                }
                world.feed(ganimal_id, *amount).map_err(|e| e.to_string())?;
            }
            EventKind::Annotated { record } => {
                self.user_world(&record.user_id, record.world_id)?;
                if !self.world_mut(record.world_id)?.knows(&record.ganimal_id) {
                    return Err(format!(
                        "{} is not in world {}",
                        record.ganimal_id, record.world_id
                    ));
                }
                let ack = self
                    .annotations
                    .record_annotation(record)
                    .map_err(|e| e.to_string())?;
                for metric in ack.metrics {
                    self.refresh_leaderboard(record.world_id, metric)?;
                }
            }
            EventKind::Ticked { decay } => {
                for world in self.worlds.values_mut() {
                    world.tick(*decay).map_err(|e| e.to_string())?;
                }
            }
        }
        Ok(())
    }

    fn refresh_leaderboard(&mut self, world_id: WorldId, metric: Metric) -> Result<(), String> {
        let Some(characteristic) = metric.characteristic() else {
            return Ok(());
        };
        let means = self.annotations.world_means(world_id, metric);
        self.world_mut(world_id)?
            .update_leaderboard(characteristic, &means)
            .map_err(|e| e.to_string())?;
        Ok(())
    }

    /// Top `limit` entries of a world's board with their world-local means.
    pub fn leaderboard(
        &self,
        world_id: WorldId,
        characteristic: Characteristic,
        limit: usize,
    ) -> Vec<(GanimalId, f64)> {
        let Some(world) = self.world(world_id) else {
            return Vec::new();
        };
        let means = self
            .annotations
            .world_means(world_id, Metric::from(characteristic));
        world
            .leaderboard(characteristic)
            .iter()
            .take(limit)
            .filter_map(|g| Some((*g, *means.get(g)?)))
            .collect()
    }

    pub fn layout(&self, world_id: WorldId) -> Option<LayoutVariant> {
        self.world(world_id).map(World::layout)
    }
}
