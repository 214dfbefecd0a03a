//! Worlds: isolated ecologies that users are randomly assigned to.
//!
//! Every world starts from its own seed set of explored ganimals. Members
//! carry energy that users top up by feeding and that decays every tick;
//! a member whose energy runs out leaves the population for good. Each
//! world also keeps its own leaderboards, built only from ratings given
//! inside that world, which is what leaderboard exploitation draws from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{CategoryId, GanimalId, Genome};
use crate::rng::{stable_hash64, DrawRng};
use crate::sampler::{
    next_discovery, Characteristic, DiscoveryResult, SamplerConfig, SamplerError,
};
use crate::taxonomy::Taxonomy;

pub const DEFAULT_SEED_SET_SIZE: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EcologyError {
    #[error("ganimal {0} is not in this world's population")]
    NotInWorld(GanimalId),
    #[error("ganimal {0} is already in the population")]
    AlreadyInPopulation(GanimalId),
    #[error("feed amount must be positive, got {0}")]
    InvalidAmount(f64),
    #[error("decay must be positive, got {0}")]
    InvalidDecay(f64),
    #[error("invalid leaderboard input: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorldId(pub u32);

impl fmt::Display for WorldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutVariant {
    FeedLinear,
    Spatial,
}

impl LayoutVariant {
    /// Round-robin assignment by world index.
    pub fn for_world(index: u32) -> LayoutVariant {
        if index.is_multiple_of(2) {
            LayoutVariant::FeedLinear
        } else {
            LayoutVariant::Spatial
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Energy a ganimal starts with when it enters the population.
    pub initial: f64,
    /// Energy lost per tick.
    pub decay: f64,
    /// Energy added per feed action.
    pub feed_amount: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            initial: 1.0,
            decay: 0.1,
            feed_amount: 0.25,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("initial", self.initial),
            ("decay", self.decay),
            ("feed_amount", self.feed_amount),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("energy.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Energy of one population member.
///
/// Decay is tracked from an anchor (the energy after the last feed, or
/// when the decay rate last changed) so that an unfed member with energy
/// `e` under decay `d` is removed after exactly `ceil(e / d)` ticks instead
/// of whenever repeated float subtraction happens to cross zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    pub energy: f64,
    pub last_fed_tick: u64,
    anchor: f64,
    anchor_decay: f64,
    ticks_since_anchor: u64,
}

impl EnergyState {
    fn new(energy: f64, tick: u64) -> Self {
        EnergyState {
            energy,
            last_fed_tick: tick,
            anchor: energy,
            anchor_decay: 0.0,
            ticks_since_anchor: 0,
        }
    }

    fn feed(&mut self, amount: f64, tick: u64) {
        self.energy += amount;
        self.last_fed_tick = tick;
        self.anchor = self.energy;
        self.ticks_since_anchor = 0;
    }

    /// Returns true when the member is depleted.
    fn decay(&mut self, decay: f64) -> bool {
        if self.anchor_decay != decay {
            self.anchor = self.energy;
            self.anchor_decay = decay;
            self.ticks_since_anchor = 0;
        }
        self.ticks_since_anchor += 1;
        let lifetime = (self.anchor / decay).ceil();
        if self.ticks_since_anchor as f64 >= lifetime {
            self.energy = 0.0;
            true
        } else {
            // Still alive by tick count; keep energy strictly positive.
            self.energy =
                (self.anchor - decay * self.ticks_since_anchor as f64).max(f64::MIN_POSITIVE);
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    id: WorldId,
    layout: LayoutVariant,
    seed_set: Vec<GanimalId>,
    population: BTreeMap<GanimalId, EnergyState>,
    leaderboards: BTreeMap<Characteristic, Vec<GanimalId>>,
    tick: u64,
    /// Every ganimal ever present in this world, with the tick it appeared.
    first_seen: BTreeMap<GanimalId, u64>,
    removed: BTreeSet<GanimalId>,
}

impl World {
    pub fn new(id: WorldId, layout: LayoutVariant) -> World {
        World {
            id,
            layout,
            seed_set: Vec::new(),
            population: BTreeMap::new(),
            leaderboards: BTreeMap::new(),
            tick: 0,
            first_seen: BTreeMap::new(),
            removed: BTreeSet::new(),
        }
    }

    /// A world seeded with `n_seed` distinct explored ganimals, each at
    /// `initial_energy`. Returns the seed genomes alongside the world.
    pub fn create(
        rng: &mut DrawRng,
        taxonomy: &Taxonomy,
        sampler: &SamplerConfig,
        id: WorldId,
        layout: LayoutVariant,
        n_seed: usize,
        initial_energy: f64,
    ) -> Result<(World, Vec<Genome>), SamplerError> {
        let mut world = World::new(id, layout);
        let mut genomes = Vec::with_capacity(n_seed);
        let max_attempts = n_seed.saturating_mul(100).max(100);
        let mut attempts = 0;
        while genomes.len() < n_seed {
            attempts += 1;
            if attempts > max_attempts {
                return Err(SamplerError::PreconditionViolation(format!(
                    "could not find {n_seed} distinct seed ganimals"
                )));
            }
            // The board is empty, so exploitation falls back to exploration.
            let DiscoveryResult::New { genome, .. } =
                next_discovery(rng, sampler, taxonomy, &world)?
            else {
                unreachable!("empty world has no leaderboard entries");
            };
            let gid = genome.id();
            if world.first_seen.contains_key(&gid) {
                continue;
            }
            world.seed_set.push(gid);
            world.first_seen.insert(gid, 0);
            world
                .population
                .insert(gid, EnergyState::new(initial_energy, 0));
            genomes.push(genome);
        }
        Ok((world, genomes))
    }

    /// Rebuilds a world from a recorded seed set.
    pub fn from_seed_set(
        id: WorldId,
        layout: LayoutVariant,
        seed_set: Vec<GanimalId>,
        initial_energy: f64,
    ) -> World {
        let mut world = World::new(id, layout);
        for gid in &seed_set {
            world.first_seen.entry(*gid).or_insert(0);
            world
                .population
                .insert(*gid, EnergyState::new(initial_energy, 0));
        }
        world.seed_set = seed_set;
        world
    }

    pub fn id(&self) -> WorldId {
        self.id
    }

    pub fn layout(&self) -> LayoutVariant {
        self.layout
    }

    pub fn seed_set(&self) -> &[GanimalId] {
        &self.seed_set
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn population(&self) -> &BTreeMap<GanimalId, EnergyState> {
        &self.population
    }

    pub fn energy(&self, gid: &GanimalId) -> Option<&EnergyState> {
        self.population.get(gid)
    }

    /// Whether the ganimal has ever been present in this world.
    pub fn knows(&self, gid: &GanimalId) -> bool {
        self.first_seen.contains_key(gid)
    }

    pub fn first_seen(&self, gid: &GanimalId) -> Option<u64> {
        self.first_seen.get(gid).copied()
    }

    pub fn known(&self) -> impl Iterator<Item = &GanimalId> {
        self.first_seen.keys()
    }

    pub fn is_removed(&self, gid: &GanimalId) -> bool {
        self.removed.contains(gid)
    }

    /// Records that a ganimal surfaced in this world (discovered or bred)
    /// without adding it to the population. Returns false if already known.
    pub fn introduce(&mut self, gid: GanimalId) -> bool {
        if self.first_seen.contains_key(&gid) {
            return false;
        }
        self.first_seen.insert(gid, self.tick);
        true
    }

    /// Whether `adopt` would accept this ganimal.
    pub fn can_adopt(&self, gid: &GanimalId) -> bool {
        self.knows(gid) && !self.removed.contains(gid) && !self.population.contains_key(gid)
    }

    /// Moves a known ganimal into the living population.
    pub fn adopt(
        &mut self,
        gid: GanimalId,
        initial_energy: f64,
    ) -> Result<&EnergyState, EcologyError> {
        if self.population.contains_key(&gid) {
            return Err(EcologyError::AlreadyInPopulation(gid));
        }
        if !self.knows(&gid) || self.removed.contains(&gid) {
            return Err(EcologyError::NotInWorld(gid));
        }
        Ok(self
            .population
            .entry(gid)
            .or_insert(EnergyState::new(initial_energy, self.tick)))
    }

    pub fn feed(&mut self, gid: &GanimalId, amount: f64) -> Result<EnergyState, EcologyError> {
        if !(amount.is_finite() && amount > 0.0) {
            return Err(EcologyError::InvalidAmount(amount));
        }
        let tick = self.tick;
        let state = self
            .population
            .get_mut(gid)
            .ok_or(EcologyError::NotInWorld(*gid))?;
        state.feed(amount, tick);
        Ok(state.clone())
    }

    /// Advances one tick: every member loses `decay`, depleted members are
    /// removed and returned in id order.
    pub fn tick(&mut self, decay: f64) -> Result<Vec<GanimalId>, EcologyError> {
        if !(decay.is_finite() && decay > 0.0) {
            return Err(EcologyError::InvalidDecay(decay));
        }
        let mut removed = Vec::new();
        for (gid, state) in self.population.iter_mut() {
            if state.decay(decay) {
                removed.push(*gid);
            }
        }
        for gid in &removed {
            self.population.remove(gid);
            self.removed.insert(*gid);
        }
        self.tick += 1;
        Ok(removed)
    }

    /// Ranks `ratings` (ganimal → mean rating from this world's
    /// annotations) and stores the result as the characteristic's board.
    ///
    /// Order: rating descending, then earlier first appearance, then id bytes.
    pub fn update_leaderboard(
        &mut self,
        characteristic: Characteristic,
        ratings: &BTreeMap<GanimalId, f64>,
    ) -> Result<Vec<GanimalId>, EcologyError> {
        for (gid, rating) in ratings {
            if !self.knows(gid) {
                return Err(EcologyError::Validation(format!(
                    "ganimal {gid} never appeared in world {}",
                    self.id
                )));
            }
            if !rating.is_finite() {
                return Err(EcologyError::Validation(format!(
                    "rating {rating} for {gid}"
                )));
            }
        }
        let mut ranked: Vec<(GanimalId, f64)> = ratings.iter().map(|(g, r)| (*g, *r)).collect();
        ranked.sort_by(|(ga, ra), (gb, rb)| {
            rb.total_cmp(ra)
                .then_with(|| self.first_seen[ga].cmp(&self.first_seen[gb]))
                .then_with(|| ga.cmp(gb))
        });
        let board: Vec<GanimalId> = ranked.into_iter().map(|(g, _)| g).collect();
        self.leaderboards.insert(characteristic, board.clone());
        Ok(board)
    }

    pub fn leaderboard(&self, characteristic: Characteristic) -> &[GanimalId] {
        self.leaderboards
            .get(&characteristic)
            .map_or(&[], Vec::as_slice)
    }

    /// The population in display order: energy descending, ties by id.
    pub fn promoted(&self) -> Vec<(GanimalId, &EnergyState)> {
        let mut members: Vec<(GanimalId, &EnergyState)> =
            self.population.iter().map(|(g, s)| (*g, s)).collect();
        members.sort_by(|a, b| {
            b.1.energy
                .total_cmp(&a.1.energy)
                .then_with(|| a.0.cmp(&b.0))
        });
        members
    }
}

/// Deterministic uniform assignment of a user to one of `n_worlds` worlds.
pub fn assign_user(user_id: &str, n_worlds: u32) -> WorldId {
    assert!(n_worlds > 0, "at least one world");
    WorldId((stable_hash64("ganimals-world-assign-v1", user_id) % n_worlds as u64) as u32)
}

/// Shannon entropy (nats) of category-weight mass summed over `members`.
///
/// Members whose genome `lookup` cannot resolve are skipped.
pub fn category_entropy<'i, 'g, I, F>(members: I, lookup: F) -> f64
where
    I: IntoIterator<Item = &'i GanimalId>,
    F: Fn(&GanimalId) -> Option<&'g Genome>,
{
    let mut mass: BTreeMap<CategoryId, f64> = BTreeMap::new();
    for gid in members {
        if let Some(genome) = lookup(gid) {
            for c in genome.components() {
                *mass.entry(c.category).or_default() += c.weight;
            }
        }
    }
    let total: f64 = mass.values().sum();
    if total <= 0.0 {
        return 0.0;
    }
    mass.values()
        .map(|m| m / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gid(n: u8) -> GanimalId {
        GanimalId([n; 32])
    }

    fn world_with(members: &[u8], energy: f64) -> World {
        World::from_seed_set(
            WorldId(0),
            LayoutVariant::FeedLinear,
            members.iter().map(|n| gid(*n)).collect(),
            energy,
        )
    }

    #[test]
    fn assignment_is_stable() {
        assert_eq!(assign_user("alice", 4), assign_user("alice", 4));
        for user in ["a", "b", "c", "d", "e"] {
            assert_eq!(assign_user(user, 1), WorldId(0));
        }
    }

    #[test]
    fn create_world_seeds_population() {
        let t = Taxonomy::bundled();
        let mut rng = DrawRng::from_seed(1);
        let (world, genomes) = World::create(
            &mut rng,
            &t,
            &SamplerConfig::default(),
            WorldId(0),
            LayoutVariant::Spatial,
            DEFAULT_SEED_SET_SIZE,
            1.0,
        )
        .unwrap();
        assert_eq!(world.population().len(), 100);
        assert_eq!(world.seed_set().len(), 100);
        assert_eq!(genomes.len(), 100);
        for (g, id) in genomes.iter().zip(world.seed_set()) {
            assert_eq!(g.id(), *id);
            assert!(world.population().contains_key(id));
        }

        let (empty, none) = World::create(
            &mut rng,
            &t,
            &SamplerConfig::default(),
            WorldId(1),
            LayoutVariant::FeedLinear,
            0,
            1.0,
        )
        .unwrap();
        assert!(empty.population().is_empty());
        assert!(none.is_empty());
    }

    #[test]
    fn worlds_from_different_seeds_are_disjoint() {
        let t = Taxonomy::bundled();
        let make = |seed| {
            World::create(
                &mut DrawRng::from_seed(seed),
                &t,
                &SamplerConfig::default(),
                WorldId(seed as u32),
                LayoutVariant::FeedLinear,
                100,
                1.0,
            )
            .unwrap()
            .0
        };
        let (a, b) = (make(1), make(2));
        let shared = a.seed_set().iter().filter(|g| b.knows(g)).count();
        assert_eq!(shared, 0);
    }

    #[test]
    fn feeding_adds_energy() {
        let mut w = world_with(&[1], 1.0);
        let state = w.feed(&gid(1), 0.5).unwrap();
        assert_eq!(state.energy, 1.5);
        assert_eq!(w.feed(&gid(2), 0.5), Err(EcologyError::NotInWorld(gid(2))));
        assert_eq!(w.feed(&gid(1), 0.0), Err(EcologyError::InvalidAmount(0.0)));
    }

    #[test]
    fn unfed_member_is_removed_on_fourth_tick() {
        let mut w = world_with(&[1], 1.0);
        for _ in 0..3 {
            assert!(w.tick(0.25).unwrap().is_empty());
        }
        assert_eq!(w.tick(0.25).unwrap(), vec![gid(1)]);
        assert!(w.population().is_empty());
        assert_eq!(w.feed(&gid(1), 1.0), Err(EcologyError::NotInWorld(gid(1))));
        assert_eq!(w.tick_count(), 4);
    }

    #[test]
    fn tenth_of_unit_energy_lasts_ten_ticks() {
        let mut w = world_with(&[1], 1.0);
        for _ in 0..9 {
            assert!(w.tick(0.1).unwrap().is_empty());
        }
        assert_eq!(w.tick(0.1).unwrap(), vec![gid(1)]);
    }

    #[test]
    fn fed_member_survives() {
        let mut w = world_with(&[1], 1.0);
        for _ in 0..500 {
            w.feed(&gid(1), 0.1).unwrap();
            assert!(w.tick(0.1).unwrap().is_empty());
        }
        assert!(w.energy(&gid(1)).unwrap().energy > 0.0);
    }

    #[test]
    fn empty_world_ticks() {
        let mut w = World::new(WorldId(3), LayoutVariant::Spatial);
        assert!(w.tick(0.1).unwrap().is_empty());
        assert_eq!(w.tick_count(), 1);
        assert_eq!(w.tick(0.0), Err(EcologyError::InvalidDecay(0.0)));
    }

    #[test]
    fn adoption_rules() {
        let mut w = World::new(WorldId(0), LayoutVariant::FeedLinear);
        assert_eq!(
            w.adopt(gid(5), 1.0).unwrap_err(),
            EcologyError::NotInWorld(gid(5))
        );
        assert!(w.introduce(gid(5)));
        assert!(!w.introduce(gid(5)));
        assert!(w.can_adopt(&gid(5)));
        w.adopt(gid(5), 1.0).unwrap();
        assert_eq!(
            w.adopt(gid(5), 1.0).unwrap_err(),
            EcologyError::AlreadyInPopulation(gid(5))
        );
        for _ in 0..10 {
            w.tick(0.1).unwrap();
        }
        assert!(w.is_removed(&gid(5)));
        assert!(!w.can_adopt(&gid(5)));
        assert_eq!(
            w.adopt(gid(5), 1.0).unwrap_err(),
            EcologyError::NotInWorld(gid(5))
        );
    }

    #[test]
    fn leaderboard_ordering() {
        let mut w = World::new(WorldId(0), LayoutVariant::FeedLinear);
        w.introduce(gid(9));
        w.tick(0.1).unwrap();
        w.introduce(gid(1));
        w.introduce(gid(2));

        let board = w
            .update_leaderboard(
                Characteristic::Cute,
                &BTreeMap::from([(gid(1), 4.5), (gid(2), 3.0)]),
            )
            .unwrap();
        assert_eq!(board, vec![gid(1), gid(2)]);

        // Tie: the earlier-seen ganimal wins even though its id sorts later.
        let board = w
            .update_leaderboard(
                Characteristic::Cute,
                &BTreeMap::from([(gid(1), 4.0), (gid(9), 4.0)]),
            )
            .unwrap();
        assert_eq!(board, vec![gid(9), gid(1)]);

        // Same tick: id bytes decide.
        let board = w
            .update_leaderboard(
                Characteristic::Creepy,
                &BTreeMap::from([(gid(2), 4.0), (gid(1), 4.0)]),
            )
            .unwrap();
        assert_eq!(board, vec![gid(1), gid(2)]);
        assert_eq!(w.leaderboard(Characteristic::Creepy), &[gid(1), gid(2)]);

        let foreign = w.update_leaderboard(Characteristic::Cute, &BTreeMap::from([(gid(77), 5.0)]));
        assert!(matches!(foreign, Err(EcologyError::Validation(_))));
    }

    #[test]
    fn promoted_order_is_energy_descending() {
        let mut w = world_with(&[1, 2, 3], 1.0);
        w.feed(&gid(2), 0.5).unwrap();
        w.feed(&gid(3), 0.25).unwrap();
        let order: Vec<GanimalId> = w.promoted().into_iter().map(|(g, _)| g).collect();
        assert_eq!(order, vec![gid(2), gid(3), gid(1)]);
    }

    #[test]
    fn entropy_of_uniform_mass() {
        let t = Taxonomy::bundled();
        let a = Genome::pair(&t, 0, 1, 0.5, 0).unwrap();
        let b = Genome::pair(&t, 2, 3, 0.5, 0).unwrap();
        let genomes = BTreeMap::from([(a.id(), a.clone()), (b.id(), b.clone())]);
        let h = category_entropy(genomes.keys(), |g| genomes.get(g));
        assert!((h - 4f64.ln()).abs() < 1e-12);
        let h1 = category_entropy([a.id()].iter(), |g| genomes.get(g));
        assert!((h1 - 2f64.ln()).abs() < 1e-12);
        let empty: Vec<GanimalId> = Vec::new();
        assert_eq!(category_entropy(empty.iter(), |g| genomes.get(g)), 0.0);
    }
}
