//! Synthetic-user simulation over an in-memory platform.
//!
//! Each simulated user lives in the world the platform assigns it and acts
//! once per step: discover, feed, annotate or breed. Worlds get an
//! [`AgentProfile`] that biases which ganimals their users feed, annotate
//! and breed; ratings follow [`crate::config::PlantedEffects`]. Every step
//! goes through the same [`Platform`] operations the HTTP API uses, so the
//! resulting event log replays to the reported state hash.
//!
//! Reports are deterministic: the same config, user count, step count and
//! seed serialize to identical bytes.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use ganimals_core::ecology::category_entropy;
use ganimals_core::{
    CategoryId, CategoryPredicate, Characteristic, DrawRng, GanimalId, Generation, Genome,
    GroupComparison, Metric, MockBackend, SubjectiveRating, Taxonomy, WorldId,
};
use serde::{Deserialize, Serialize};

use crate::config::{AgentProfile, ServiceConfig};
use crate::events::Event;
use crate::platform::{
    AnnotationBody, LeaderboardEntry, ManualClock, Platform, PlatformError, Result,
};
use crate::state::PlatformState;

/// Simulated milliseconds between consecutive actions.
const ACTION_MS: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Discover,
    Feed,
    Annotate,
    Breed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionCount {
    pub ok: u64,
    /// Refused by the platform (for example nothing left to feed).
    pub refused: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldReport {
    pub world_id: WorldId,
    pub profile: String,
    pub users: usize,
    pub seed_set_size: usize,
    /// Entropy of category-weight mass over the seed set.
    pub seed_set_entropy: f64,
    pub population: usize,
    /// Entropy of category-weight mass over the living population.
    pub entropy: f64,
    /// Share of the living population containing a dog category.
    pub dog_fraction: f64,
    pub known: usize,
    pub removed: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub leaderboards: BTreeMap<Characteristic, Vec<LeaderboardEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub metric: Metric,
    pub predicate: CategoryPredicate,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub comparison: Option<GroupComparison>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub users: usize,
    pub steps: u64,
    pub ticks: u64,
    pub worlds: Vec<WorldReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub stats: Vec<StatsReport>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub actions: BTreeMap<Action, ActionCount>,
    pub event_count: u64,
    pub state_hash: String,
}

impl SimulationReport {
    /// The canonical byte encoding written by `simulate --out`.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn world(&self, id: WorldId) -> Option<&WorldReport> {
        self.worlds.iter().find(|w| w.world_id == id)
    }
}

/// A finished run: the report plus the event log that produced it.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub report: SimulationReport,
    pub events: Vec<Event>,
}

struct Agent {
    id: String,
    world: WorldId,
    rng: DrawRng,
    recent: VecDeque<GanimalId>,
}

pub fn user_name(index: usize) -> String {
    format!("sim-{index:05}")
}

fn profile_for(config: &ServiceConfig, world: WorldId) -> &AgentProfile {
    let profiles = &config.simulation.profiles;
    &profiles[world.0 as usize % profiles.len()]
}

fn flag_mass(genome: &Genome, flag: impl Fn(CategoryId) -> bool) -> f64 {
    genome
        .components()
        .iter()
        .filter(|c| flag(c.category))
        .map(|c| c.weight)
        .sum()
}

fn appeal(profile: &AgentProfile, genome: &Genome, taxonomy: &Taxonomy) -> f64 {
    let dog = flag_mass(genome, |c| taxonomy.is_dog(c));
    let insect = flag_mass(genome, |c| taxonomy.is_insect(c));
    (profile.dog_affinity * dog + profile.insect_affinity * insect).exp()
}

/// Index drawn with probability proportional to `weights`.
fn weighted_index(rng: &mut DrawRng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return None;
    }
    let mut x = rng.unit() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return Some(i);
        }
        x -= w;
    }
    Some(weights.len() - 1)
}

fn choose_action(rng: &mut DrawRng, config: &ServiceConfig) -> Action {
    let mix = config.simulation.actions;
    let weights = [mix.discover, mix.feed, mix.annotate, mix.breed];
    match weighted_index(rng, &weights) {
        Some(0) | None => Action::Discover,
        Some(1) => Action::Feed,
        Some(2) => Action::Annotate,
        _ => Action::Breed,
    }
}

fn cute_rating(
    rng: &mut DrawRng,
    config: &ServiceConfig,
    genome: &Genome,
    taxonomy: &Taxonomy,
) -> u8 {
    let e = config.simulation.effects;
    let mut score = e.cute_base;
    if CategoryPredicate::ContainsDog.holds(genome, taxonomy) {
        score += e.dog_cute_shift;
    }
    if CategoryPredicate::ContainsInsect.holds(genome, taxonomy) {
        score += e.insect_cute_shift;
    }
    score += e.noise_sd * rng.approx_normal();
    score.round().clamp(1.0, 7.0) as u8
}

/// Living members of the agent's world plus what the agent recently saw,
/// each with its appeal to the agent's world profile.
fn candidates(
    state: &PlatformState,
    agent: &Agent,
    profile: &AgentProfile,
    taxonomy: &Taxonomy,
    filter: impl Fn(&PlatformState, &GanimalId) -> bool,
) -> Vec<(GanimalId, f64)> {
    let world = &state.worlds[&agent.world];
    let mut ids: Vec<GanimalId> = world.population().keys().copied().collect();
    for g in &agent.recent {
        if !world.energy(g).is_some() {
            ids.push(*g);
        }
    }
    ids.into_iter()
        .filter(|g| filter(state, g))
        .filter_map(|g| {
            let genome = &state.ganimals.get(&g)?.genome;
            Some((g, appeal(profile, genome, taxonomy)))
        })
        .collect()
}

fn pick(rng: &mut DrawRng, pool: &[(GanimalId, f64)]) -> Option<GanimalId> {
    let weights: Vec<f64> = pool.iter().map(|(_, w)| *w).collect();
    weighted_index(rng, &weights).map(|i| pool[i].0)
}

fn remember(agent: &mut Agent, gid: GanimalId, capacity: usize) {
    if capacity == 0 || agent.recent.contains(&gid) {
        return;
    }
    if agent.recent.len() == capacity {
        agent.recent.pop_front();
    }
    agent.recent.push_back(gid);
}

/// Platform errors an agent can run into through ordinary play.
fn is_refusal(e: &PlatformError) -> bool {
    matches!(
        e,
        PlatformError::NotInPopulation(_)
            | PlatformError::OtherWorld(_)
            | PlatformError::Conflict(_)
            | PlatformError::Unprocessable(_)
    )
}

fn act(
    platform: &Platform,
    config: &ServiceConfig,
    agent: &mut Agent,
    counts: &mut BTreeMap<Action, ActionCount>,
) -> Result<()> {
    let taxonomy = platform.taxonomy();
    let profile = profile_for(config, agent.world).clone();
    let memory = config.simulation.memory;
    let action = choose_action(&mut agent.rng, config);
    let outcome: Result<bool> = match action {
        Action::Discover => platform.discover(&agent.id).map(|d| {
            remember(agent, d.ganimal.ganimal.id, memory);
            true
        }),
        Action::Feed => {
            let adoptable = |s: &PlatformState, g: &GanimalId| {
                let w = &s.worlds[&agent.world];
                w.energy(g).is_some() || w.can_adopt(g)
            };
            let pool = platform.read(|s| candidates(s, agent, &profile, taxonomy, adoptable))?;
            match pick(&mut agent.rng, &pool) {
                Some(gid) => platform.feed(&agent.id, gid).map(|_| true),
                None => Ok(false),
            }
        }
        Action::Annotate => {
            let pool = platform.read(|s| candidates(s, agent, &profile, taxonomy, |_, _| true))?;
            match pick(&mut agent.rng, &pool) {
                Some(gid) => {
                    let genome = platform.read(|s| s.ganimals[&gid].genome.clone())?;
                    let cute = cute_rating(&mut agent.rng, config, &genome, taxonomy);
                    let body = AnnotationBody {
                        morphology: None,
                        ratings: Some(SubjectiveRating {
                            cute: Some(cute),
                            ..Default::default()
                        }),
                    };
                    platform.annotate(&agent.id, gid, body).map(|_| true)
                }
                None => Ok(false),
            }
        }
        Action::Breed => {
            let g1 = |s: &PlatformState, g: &GanimalId| {
                s.ganimals[g].genome.generation() == Generation::G1
            };
            let mut pool = platform.read(|s| candidates(s, agent, &profile, taxonomy, g1))?;
            match pick(&mut agent.rng, &pool) {
                Some(a) => {
                    pool.retain(|(g, _)| *g != a);
                    match pick(&mut agent.rng, &pool) {
                        Some(b) => platform.breed(&agent.id, a, b, None).map(|child| {
                            remember(agent, child.ganimal.id, memory);
                            true
                        }),
                        None => Ok(false),
                    }
                }
                None => Ok(false),
            }
        }
    };
    let count = counts.entry(action).or_default();
    match outcome {
        Ok(true) => count.ok += 1,
        Ok(false) => count.refused += 1,
        Err(e) if is_refusal(&e) => count.refused += 1,
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Runs `users` synthetic users for `steps` steps. The platform's master
/// seed is replaced by `seed`.
pub fn run(config: &ServiceConfig, users: usize, steps: u64, seed: u64) -> Result<SimulationRun> {
    let mut config = config.clone();
    config.master_seed = seed;
    config.resolution = config.simulation.resolution;
    config.snapshot_every = 0;
    config.backend_url = None;
    let backend = Arc::new(MockBackend {
        max_resolution: config.max_resolution,
    });
    let clock = Arc::new(ManualClock::new(ACTION_MS));
    let (platform, log) = Platform::in_memory(config.clone(), backend, clock.clone())?;

    let mut agents = Vec::new();
    let mut counts = BTreeMap::new();
    let mut ticks = 0;
    if steps > 0 {
        for u in 0..users {
            let id = user_name(u);
            let assignment = platform.assign(&id)?;
            clock.advance(ACTION_MS);
            agents.push(Agent {
                rng: DrawRng::derive(seed, "agent", &[u as u64]),
                id,
                world: assignment.world_id,
                recent: VecDeque::new(),
            });
        }
    }
    for step in 1..=steps {
        for agent in agents.iter_mut() {
            act(&platform, &config, agent, &mut counts)?;
            clock.advance(ACTION_MS);
        }
        if step % config.simulation.tick_every == 0 {
            platform.tick()?;
            ticks += 1;
            clock.advance(ACTION_MS);
        }
    }

    let report = platform.read(|state| {
        build_report(
            &config,
            platform.taxonomy(),
            state,
            &agents,
            seed,
            users,
            steps,
            ticks,
            counts,
        )
    })?;
    Ok(SimulationRun {
        report,
        events: log.events(),
    })
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    config: &ServiceConfig,
    taxonomy: &Taxonomy,
    state: &PlatformState,
    agents: &[Agent],
    seed: u64,
    users: usize,
    steps: u64,
    ticks: u64,
    actions: BTreeMap<Action, ActionCount>,
) -> SimulationReport {
    let genome = |g: &GanimalId| state.ganimals.get(g).map(|x| &x.genome);
    let worlds = state
        .worlds
        .iter()
        .map(|(id, world)| {
            let population: Vec<GanimalId> = world.population().keys().copied().collect();
            let dogs = population
                .iter()
                .filter_map(genome)
                .filter(|g| CategoryPredicate::ContainsDog.holds(g, taxonomy))
                .count();
            let leaderboards = if steps == 0 {
                BTreeMap::new()
            } else {
                Characteristic::ALL
                    .into_iter()
                    .map(|ch| {
                        let entries = state
                            .leaderboard(*id, ch, config.leaderboard_k)
                            .into_iter()
                            .enumerate()
                            .map(|(i, (ganimal_id, mean_rating))| LeaderboardEntry {
                                rank: i + 1,
                                ganimal_id,
                                mean_rating,
                            })
                            .collect();
                        (ch, entries)
                    })
                    .collect()
            };
            WorldReport {
                world_id: *id,
                profile: profile_for(config, *id).name.clone(),
                users: agents.iter().filter(|a| a.world == *id).count(),
                seed_set_size: world.seed_set().len(),
                seed_set_entropy: category_entropy(world.seed_set(), genome),
                population: population.len(),
                entropy: category_entropy(&population, genome),
                dog_fraction: if population.is_empty() {
                    0.0
                } else {
                    dogs as f64 / population.len() as f64
                },
                known: world.known().count(),
                removed: world.known().filter(|g| world.is_removed(g)).count(),
                leaderboards,
            }
        })
        .collect();
    let stats = if steps == 0 {
        Vec::new()
    } else {
        CategoryPredicate::ALL
            .into_iter()
            .map(|predicate| {
                match state
                    .annotations
                    .compare_by(Metric::Cute, predicate, taxonomy)
                {
                    Ok(c) => StatsReport {
                        metric: Metric::Cute,
                        predicate,
                        comparison: Some(c),
                        error: None,
                    },
                    Err(e) => StatsReport {
                        metric: Metric::Cute,
                        predicate,
                        comparison: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    };
    SimulationReport {
        seed,
        users,
        steps,
        ticks,
        worlds,
        stats,
        actions,
        event_count: state.next_seq,
        state_hash: state.state_hash(),
    }
}
