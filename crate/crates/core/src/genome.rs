//! Genome algebra.
//!
//! A genome is a convex mixture of animal categories. At render time the
//! weights are applied to per-category class vectors; the bred artifact is
//! the weight vector itself, never pixels. Generations follow breeding depth:
//! G0 is a single category, G1 the midpoint of two G0s, G2 the midpoint of
//! two G1s (three or four categories, since G1 parents may share one).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decimal::format_g17;
use crate::taxonomy::Taxonomy;

pub use crate::taxonomy::CategoryId;

/// Tolerance on Σ weights = 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Truncation used for freshly sampled genomes when nothing else is given.
pub const DEFAULT_TRUNCATION: f64 = 0.5;

const DEFAULT_NOISE_SALT: u64 = u64::from_be_bytes(*b"ganimals");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenomeError {
    #[error("unknown category {0}")]
    UnknownCategory(CategoryId),
    #[error("truncation {0} outside (0, 1]")]
    TruncationOutOfRange(f64),
    #[error("cannot breed category {0} with itself")]
    SameCategory(CategoryId),
    #[error("expected a {expected} parent, got {found}")]
    WrongGeneration {
        expected: Generation,
        found: Generation,
    },
    #[error("parents carry the same categories")]
    IdenticalParents,
    #[error("invalid genome: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Generation {
    G0,
    G1,
    G2,
}

impl Generation {
    fn admits(self, components: usize) -> bool {
        match self {
            Generation::G0 => components == 1,
            Generation::G1 => components == 2,
            Generation::G2 => components == 3 || components == 4,
        }
    }
}

impl fmt::Display for Generation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Generation::G0 => "G0",
            Generation::G1 => "G1",
            Generation::G2 => "G2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub category: CategoryId,
    pub weight: f64,
}

/// How a child's noise seed derives from its parents'.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseRule {
    /// Stable hash of (min seed, max seed, salt). Symmetric in the parents.
    SaltedHash(u64),
    /// Every child gets this seed.
    Fixed(u64),
}

impl Default for NoiseRule {
    fn default() -> Self {
        NoiseRule::SaltedHash(DEFAULT_NOISE_SALT)
    }
}

impl NoiseRule {
    pub fn child_seed(self, a: u64, b: u64) -> u64 {
        match self {
            NoiseRule::SaltedHash(salt) => {
                let mut hasher = Sha256::new();
                hasher.update(b"ganimals-noise-v1");
                hasher.update(a.min(b).to_le_bytes());
                hasher.update(a.max(b).to_le_bytes());
                hasher.update(salt.to_le_bytes());
                let digest = hasher.finalize();
                u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
            }
            NoiseRule::Fixed(seed) => seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TruncationRule {
    #[default]
    Mean,
    Fixed(f64),
}

impl TruncationRule {
    pub fn child_truncation(self, a: f64, b: f64) -> f64 {
        match self {
            TruncationRule::Mean => (a + b) / 2.0,
            TruncationRule::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Genome {
    components: Vec<Component>,
    truncation: f64,
    noise_seed: u64,
    generation: Generation,
}

impl Genome {
    /// Validating constructor. Components may arrive in any order; they are
    /// stored sorted by category id.
    pub fn new(
        mut components: Vec<Component>,
        truncation: f64,
        noise_seed: u64,
        generation: Generation,
    ) -> Result<Genome, GenomeError> {
        check_truncation(truncation)?;
        components.sort_by_key(|c| c.category);
        if let Some(pair) = components
            .windows(2)
            .find(|w| w[0].category == w[1].category)
        {
            return Err(GenomeError::Invalid(format!(
                "category {} listed twice",
                pair[0].category
            )));
        }
        if let Some(c) = components
            .iter()
            .find(|c| !(c.weight.is_finite() && c.weight > 0.0))
        {
            return Err(GenomeError::Invalid(format!(
                "weight {} for category {} is not positive",
                c.weight, c.category
            )));
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(GenomeError::Invalid(format!("weights sum to {sum}")));
        }
        if !generation.admits(components.len()) {
            return Err(GenomeError::Invalid(format!(
                "{generation} cannot have {} components",
                components.len()
            )));
        }
        Ok(Genome {
            components,
            truncation,
            noise_seed,
            generation,
        })
    }

    pub fn make_g0(
        taxonomy: &Taxonomy,
        category: CategoryId,
        truncation: f64,
        noise_seed: u64,
    ) -> Result<Genome, GenomeError> {
        if !taxonomy.contains(category) {
            return Err(GenomeError::UnknownCategory(category));
        }
        Genome::new(
            vec![Component {
                category,
                weight: 1.0,
            }],
            truncation,
            noise_seed,
            Generation::G0,
        )
    }

    /// A G1 straight from two categories, as produced by the exploration
    /// samplers (they draw a fresh seed rather than breeding two G0s).
    pub fn pair(
        taxonomy: &Taxonomy,
        a: CategoryId,
        b: CategoryId,
        truncation: f64,
        noise_seed: u64,
    ) -> Result<Genome, GenomeError> {
        for id in [a, b] {
            if !taxonomy.contains(id) {
                return Err(GenomeError::UnknownCategory(id));
            }
        }
        if a == b {
            return Err(GenomeError::SameCategory(a));
        }
        Genome::new(
            vec![
                Component {
                    category: a,
                    weight: 0.5,
                },
                Component {
                    category: b,
                    weight: 0.5,
                },
            ],
            truncation,
            noise_seed,
            Generation::G1,
        )
    }

    pub fn breed_pair(
        a: &Genome,
        b: &Genome,
        noise: NoiseRule,
        truncation: TruncationRule,
    ) -> Result<Genome, GenomeError> {
        expect_generation(a, Generation::G0)?;
        expect_generation(b, Generation::G0)?;
        let (ca, cb) = (a.components[0].category, b.components[0].category);
        if ca == cb {
            return Err(GenomeError::SameCategory(ca));
        }
        Genome::new(
            vec![
                Component {
                    category: ca,
                    weight: 0.5,
                },
                Component {
                    category: cb,
                    weight: 0.5,
                },
            ],
            truncation.child_truncation(a.truncation, b.truncation),
            noise.child_seed(a.noise_seed, b.noise_seed),
            Generation::G1,
        )
    }

    /// Halve each parent's weights and merge; shared categories accumulate.
    ///
    /// Parents with the same category pair are rejected: their blend would
    /// collapse to two components and is not a distinct G2.
    pub fn breed_quad(
        a: &Genome,
        b: &Genome,
        noise: NoiseRule,
        truncation: TruncationRule,
    ) -> Result<Genome, GenomeError> {
        expect_generation(a, Generation::G1)?;
        expect_generation(b, Generation::G1)?;
        if a.categories().eq(b.categories()) {
            return Err(GenomeError::IdenticalParents);
        }

        let mut merged: Vec<Component> = Vec::with_capacity(4);
        for c in a.components.iter().chain(&b.components) {
            let half = c.weight / 2.0;
            match merged.iter_mut().find(|m| m.category == c.category) {
                Some(existing) => existing.weight += half,
                None => merged.push(Component {
                    category: c.category,
                    weight: half,
                }),
            }
        }
        Genome::new(
            merged,
            truncation.child_truncation(a.truncation, b.truncation),
            noise.child_seed(a.noise_seed, b.noise_seed),
            Generation::G2,
        )
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn categories(&self) -> impl Iterator<Item = CategoryId> + '_ {
        self.components.iter().map(|c| c.category)
    }

    pub fn weight_of(&self, category: CategoryId) -> f64 {
        self.components
            .iter()
            .find(|c| c.category == category)
            .map_or(0.0, |c| c.weight)
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    pub fn generation(&self) -> Generation {
        self.generation
    }

    /// `v1|trunc=<%.17g>|seed=<u64>|<id>:<%.17g>,...`, components by id.
    pub fn canonical_string(&self) -> String {
        let components: Vec<String> = self
            .components
            .iter()
            .map(|c| format!("{}:{}", c.category, format_g17(c.weight)))
            .collect();
        format!(
            "v1|trunc={}|seed={}|{}",
            format_g17(self.truncation),
            self.noise_seed,
            components.join(",")
        )
    }

    pub fn id(&self) -> GanimalId {
        GanimalId(Sha256::digest(self.canonical_string().as_bytes()).into())
    }
}

fn check_truncation(t: f64) -> Result<(), GenomeError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(GenomeError::TruncationOutOfRange(t))
    }
}

fn expect_generation(g: &Genome, expected: Generation) -> Result<(), GenomeError> {
    if g.generation == expected {
        Ok(())
    } else {
        Err(GenomeError::WrongGeneration {
            expected,
            found: g.generation,
        })
    }
}

#[derive(Deserialize)]
struct RawGenome {
    components: Vec<Component>,
    truncation: f64,
    noise_seed: u64,
    generation: Generation,
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawGenome::deserialize(deserializer)?;
        Genome::new(
            raw.components,
            raw.truncation,
            raw.noise_seed,
            raw.generation,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// SHA-256 of a genome's canonical serialization.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GanimalId(pub [u8; 32]);

impl GanimalId {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for GanimalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for GanimalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GanimalId({})", &self.to_hex()[..12])
    }
}

impl FromStr for GanimalId {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(s, &mut bytes)?;
        Ok(GanimalId(bytes))
    }
}

impl Serialize for GanimalId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for GanimalId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpaceCounts {
    pub g0: u128,
    pub g1: u128,
    pub g2: u128,
}

/// Size of the possibility space over `n` categories, before seed and
/// truncation variation: n singles, C(n,2) pairs, and C(C(n,2),2) pairs of
/// distinct pairs.
pub fn count_space(n_categories: u64) -> SpaceCounts {
    let choose2 = |n: u128| n * n.saturating_sub(1) / 2;
    let g0 = n_categories as u128;
    let g1 = choose2(g0);
    SpaceCounts {
        g0,
        g1,
        g2: choose2(g1),
    }
}
