//! The discovery policy.
//!
//! Each discovery first picks one of four procedures from a fixed mixture
//! (30% recipe, 30% uniform, 30% species-stratified, 10% leaderboard by
//! default), then either proposes a fresh G1 pair or re-serves an existing
//! ganimal from the caller's world leaderboard. The mixture does not adapt;
//! the crowd steers discovery only through the leaderboards it fills.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecology::World;
use crate::genome::{CategoryId, GanimalId, Genome, GenomeError, DEFAULT_TRUNCATION};
use crate::rng::DrawRng;
use crate::taxonomy::{CoreName, Taxonomy};

const MIX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid policy mix: {0}")]
    InvalidMix(String),
    #[error("leaderboard is empty")]
    EmptyLeaderboard,
    #[error("leaderboard depth must be positive")]
    InvalidDepth,
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    Recipe,
    Uniform,
    Stratified,
    Leaderboard,
}

impl Procedure {
    pub const ALL: [Procedure; 4] = [
        Procedure::Recipe,
        Procedure::Uniform,
        Procedure::Stratified,
        Procedure::Leaderboard,
    ];
}

/// The subjective characteristics that have leaderboards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Characteristic {
    Cute,
    Creepy,
    Realistic,
    Memorable,
}

impl Characteristic {
    pub const ALL: [Characteristic; 4] = [
        Characteristic::Cute,
        Characteristic::Creepy,
        Characteristic::Realistic,
        Characteristic::Memorable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Characteristic::Cute => "cute",
            Characteristic::Creepy => "creepy",
            Characteristic::Realistic => "realistic",
            Characteristic::Memorable => "memorable",
        }
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Characteristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Characteristic::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown characteristic `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyMix {
    pub p_recipe: f64,
    pub p_uniform: f64,
    pub p_stratified: f64,
    pub p_leaderboard: f64,
}

impl Default for PolicyMix {
    fn default() -> Self {
        PolicyMix {
            p_recipe: 0.30,
            p_uniform: 0.30,
            p_stratified: 0.30,
            p_leaderboard: 0.10,
        }
    }
}

impl PolicyMix {
    pub fn new(
        recipe: f64,
        uniform: f64,
        stratified: f64,
        leaderboard: f64,
    ) -> Result<Self, SamplerError> {
        let mix = PolicyMix {
            p_recipe: recipe,
            p_uniform: uniform,
            p_stratified: stratified,
            p_leaderboard: leaderboard,
        };
        mix.validate()?;
        Ok(mix)
    }

    fn probabilities(&self) -> [f64; 4] {
        [
            self.p_recipe,
            self.p_uniform,
            self.p_stratified,
            self.p_leaderboard,
        ]
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let p = self.probabilities();
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(SamplerError::InvalidMix(format!(
                "probability {bad} outside [0, 1]"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > MIX_TOLERANCE {
            return Err(SamplerError::InvalidMix(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub mix: PolicyMix,
    /// Depth K of the rank-weighted leaderboard draw.
    pub leaderboard_k: usize,
    /// Truncation given to freshly explored G1 genomes.
    pub truncation: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            mix: PolicyMix::default(),
            leaderboard_k: 10,
            truncation: DEFAULT_TRUNCATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscoveryResult {
    /// A freshly explored G1. `fallback` marks exploitation that found an
    /// empty board and explored uniformly instead.
    New {
        genome: Genome,
        procedure: Procedure,
        fallback: bool,
    },
    Existing {
        id: GanimalId,
        characteristic: Characteristic,
    },
}

impl DiscoveryResult {
    pub fn procedure(&self) -> Procedure {
        match self {
            DiscoveryResult::New { procedure, .. } => *procedure,
            DiscoveryResult::Existing { .. } => Procedure::Leaderboard,
        }
    }
}

pub fn choose_procedure(rng: &mut DrawRng, mix: &PolicyMix) -> Result<Procedure, SamplerError> {
    mix.validate()?;
    let u = rng.unit();
    let mut cumulative = 0.0;
    let mut last_positive = Procedure::Recipe;
    for (procedure, p) in Procedure::ALL.into_iter().zip(mix.probabilities()) {
        if p <= 0.0 {
            continue;
        }
        last_positive = procedure;
        cumulative += p;
        if u < cumulative {
            return Ok(procedure);
        }
    }
    // u landed in the rounding gap below 1.0.
    Ok(last_positive)
}

/// Two distinct categories, uniform over all unordered pairs.
pub fn sample_uniform_pair(
    rng: &mut DrawRng,
    taxonomy: &Taxonomy,
) -> Result<(CategoryId, CategoryId), SamplerError> {
    let n = taxonomy.len();
    if n < 2 {
        return Err(SamplerError::PreconditionViolation(format!(
            "uniform sampling needs two categories, taxonomy has {n}"
        )));
    }
    let i = rng.index(n);
    let mut j = rng.index(n - 1);
    if j >= i {
        j += 1;
    }
    let categories = taxonomy.categories();
    Ok((categories[i].id, categories[j].id))
}

/// Two distinct species uniformly, then one category uniformly within each.
pub fn sample_stratified_pair(
    rng: &mut DrawRng,
    taxonomy: &Taxonomy,
) -> Result<(CategoryId, CategoryId), SamplerError> {
    let species = taxonomy.species_index();
    let s = species.len();
    if s < 2 {
        return Err(SamplerError::PreconditionViolation(format!(
            "stratified sampling needs two species, taxonomy has {s}"
        )));
    }
    let i = rng.index(s);
    let mut j = rng.index(s - 1);
    if j >= i {
        j += 1;
    }
    let mut pick = |k: usize| {
        let members = species.values().nth(k).expect("index in range");
        members[rng.index(members.len())]
    };
    let a = pick(i);
    let b = pick(j);
    Ok((a, b))
}

/// Two distinct cores by (weighted) core-pair draw, one category from each,
/// redrawing the categories on collision.
pub fn sample_recipe_pair(
    rng: &mut DrawRng,
    taxonomy: &Taxonomy,
) -> Result<(CategoryId, CategoryId), SamplerError> {
    let mut pairs = Vec::with_capacity(10);
    for (i, &a) in CoreName::ALL.iter().enumerate() {
        for &b in &CoreName::ALL[i + 1..] {
            let (Some(ca), Some(cb)) = (taxonomy.core(a), taxonomy.core(b)) else {
                return Err(SamplerError::PreconditionViolation(format!(
                    "recipe sampling needs all five cores; `{}` is missing",
                    if taxonomy.core(a).is_none() { a } else { b }
                )));
            };
            let weight = taxonomy.core_pair_weight(a, b);
            let feasible = ca.union(cb).nth(1).is_some();
            if weight > 0.0 && feasible {
                pairs.push((ca, cb, weight));
            }
        }
    }
    let total: f64 = pairs.iter().map(|p| p.2).sum();
    if pairs.is_empty() || total <= 0.0 {
        return Err(SamplerError::PreconditionViolation(
            "no core pair can yield two distinct categories".into(),
        ));
    }

    let target = rng.unit() * total;
    let mut cumulative = 0.0;
    let mut chosen = pairs[pairs.len() - 1];
    for pair in &pairs {
        cumulative += pair.2;
        if target < cumulative {
            chosen = *pair;
            break;
        }
    }

    let (core_a, core_b, _) = chosen;
    loop {
        let a = *core_a
            .iter()
            .nth(rng.index(core_a.len()))
            .expect("in range");
        let b = *core_b
            .iter()
            .nth(rng.index(core_b.len()))
            .expect("in range");
        if a != b {
            return Ok((a, b));
        }
    }
}

/// Rank-weighted draw from the top `k` of a ranked board: rank r (1 = best)
/// among K = min(k, len) entries has weight K - r + 1.
pub fn sample_leaderboard(
    rng: &mut DrawRng,
    board: &[GanimalId],
    k: usize,
) -> Result<GanimalId, SamplerError> {
    if k == 0 {
        return Err(SamplerError::InvalidDepth);
    }
    if board.is_empty() {
        return Err(SamplerError::EmptyLeaderboard);
    }
    let depth = k.min(board.len()) as u64;
    let total = depth * (depth + 1) / 2;
    let mut ticket = rng.below(total);
    for (rank0, id) in board.iter().take(depth as usize).enumerate() {
        let weight = depth - rank0 as u64;
        if ticket < weight {
            return Ok(*id);
        }
        ticket -= weight;
    }
    unreachable!("ticket below total weight")
}

/// One discovery for a user of `world`.
pub fn next_discovery(
    rng: &mut DrawRng,
    config: &SamplerConfig,
    taxonomy: &Taxonomy,
    world: &World,
) -> Result<DiscoveryResult, SamplerError> {
    let procedure = choose_procedure(rng, &config.mix)?;
    let mut fallback = false;
    let pair = match procedure {
        Procedure::Recipe => sample_recipe_pair(rng, taxonomy)?,
        Procedure::Uniform => sample_uniform_pair(rng, taxonomy)?,
        Procedure::Stratified => sample_stratified_pair(rng, taxonomy)?,
        Procedure::Leaderboard => {
            let characteristic = Characteristic::ALL[rng.index(Characteristic::ALL.len())];
            let board = world.leaderboard(characteristic);
            if board.is_empty() {
                fallback = true;
                sample_uniform_pair(rng, taxonomy)?
            } else {
                let id = sample_leaderboard(rng, board, config.leaderboard_k)?;
                debug_assert!(world.knows(&id));
                return Ok(DiscoveryResult::Existing { id, characteristic });
            }
        }
    };
    let seed = rng.next_u64();
    let genome = Genome::pair(taxonomy, pair.0, pair.1, config.truncation, seed)?;
    let procedure = if fallback {
        Procedure::Uniform
    } else {
        procedure
    };
    Ok(DiscoveryResult::New {
        genome,
        procedure,
        fallback,
    })
}
