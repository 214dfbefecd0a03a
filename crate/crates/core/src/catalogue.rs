//! Citizen-science annotations and the statistics built on them.
//!
//! Users answer ten yes/no morphology questions and six 1-7 subjective
//! ratings per ganimal. Each (user, ganimal, question) keeps only its latest
//! answer. Per-ganimal means feed the world leaderboards; globally they feed
//! group comparisons such as "do dog-containing ganimals rate cuter?",
//! tested with Welch's unequal-variance t-test on per-ganimal means.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::ecology::WorldId;
use crate::genome::{GanimalId, Genome};
use crate::sampler::Characteristic;
use crate::taxonomy::Taxonomy;

pub const RATING_MIN: u8 = 1;
pub const RATING_MAX: u8 = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogueError {
    #[error("unknown ganimal {0}")]
    UnknownGanimal(GanimalId),
    #[error("annotation carries no answers")]
    EmptyRecord,
    #[error("{metric} rating {value} outside {RATING_MIN}-{RATING_MAX}")]
    RatingOutOfRange { metric: Metric, value: u8 },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unknown morphology feature `{0}`")]
    UnknownFeature(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error(
        "need at least 2 rated ganimals per group, have {n_with} with and {n_without} without"
    )]
    InsufficientData { n_with: usize, n_without: usize },
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident, $err:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = CatalogueError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| CatalogueError::$err(s.to_string()))
            }
        }
    };
}

named_enum!(
    /// A subjective rating question.
    Metric, UnknownMetric {
        Compassion => "compassion",
        Empathy => "empathy",
        Cute => "cute",
        Memorable => "memorable",
        Realistic => "realistic",
        Creepy => "creepy",
    }
);

named_enum!(
    /// A morphology yes/no question.
    MorphologyFeature, UnknownFeature {
        HasHead => "has_head",
        HasEyes => "has_eyes",
        HasMouth => "has_mouth",
        HasNose => "has_nose",
        HasLegs => "has_legs",
        HasHair => "has_hair",
        HasScales => "has_scales",
        HasFeathers => "has_feathers",
        LivesUnderwater => "lives_underwater",
        BiggerThanHousecat => "bigger_than_housecat",
    }
);

impl From<Characteristic> for Metric {
    fn from(c: Characteristic) -> Metric {
        match c {
            Characteristic::Cute => Metric::Cute,
            Characteristic::Creepy => Metric::Creepy,
            Characteristic::Realistic => Metric::Realistic,
            Characteristic::Memorable => Metric::Memorable,
        }
    }
}

impl Metric {
    /// The leaderboard this metric feeds, if any.
    pub fn characteristic(self) -> Option<Characteristic> {
        match self {
            Metric::Cute => Some(Characteristic::Cute),
            Metric::Creepy => Some(Characteristic::Creepy),
            Metric::Realistic => Some(Characteristic::Realistic),
            Metric::Memorable => Some(Characteristic::Memorable),
            Metric::Compassion | Metric::Empathy => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphologyAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_head: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_eyes: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_mouth: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_nose: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_legs: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_hair: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_scales: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_feathers: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lives_underwater: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bigger_than_housecat: Option<bool>,
}

impl MorphologyAnnotation {
    pub fn get(&self, feature: MorphologyFeature) -> Option<bool> {
        use MorphologyFeature::*;
        match feature {
            HasHead => self.has_head,
            HasEyes => self.has_eyes,
            HasMouth => self.has_mouth,
            HasNose => self.has_nose,
            HasLegs => self.has_legs,
            HasHair => self.has_hair,
            HasScales => self.has_scales,
            HasFeathers => self.has_feathers,
            LivesUnderwater => self.lives_underwater,
            BiggerThanHousecat => self.bigger_than_housecat,
        }
    }

    pub fn set(&mut self, feature: MorphologyFeature, value: Option<bool>) {
        use MorphologyFeature::*;
        let slot = match feature {
            HasHead => &mut self.has_head,
            HasEyes => &mut self.has_eyes,
            HasMouth => &mut self.has_mouth,
            HasNose => &mut self.has_nose,
            HasLegs => &mut self.has_legs,
            HasHair => &mut self.has_hair,
            HasScales => &mut self.has_scales,
            HasFeathers => &mut self.has_feathers,
            LivesUnderwater => &mut self.lives_underwater,
            BiggerThanHousecat => &mut self.bigger_than_housecat,
        };
        *slot = value;
    }

    pub fn answered(&self) -> impl Iterator<Item = (MorphologyFeature, bool)> + '_ {
        MorphologyFeature::ALL
            .iter()
            .filter_map(|f| self.get(*f).map(|v| (*f, v)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectiveRating {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compassion: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empathy: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cute: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memorable: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realistic: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creepy: Option<u8>,
}

impl SubjectiveRating {
    pub fn get(&self, metric: Metric) -> Option<u8> {
        match metric {
            Metric::Compassion => self.compassion,
            Metric::Empathy => self.empathy,
            Metric::Cute => self.cute,
            Metric::Memorable => self.memorable,
            Metric::Realistic => self.realistic,
            Metric::Creepy => self.creepy,
        }
    }

    pub fn set(&mut self, metric: Metric, value: Option<u8>) {
        let slot = match metric {
            Metric::Compassion => &mut self.compassion,
            Metric::Empathy => &mut self.empathy,
            Metric::Cute => &mut self.cute,
            Metric::Memorable => &mut self.memorable,
            Metric::Realistic => &mut self.realistic,
            Metric::Creepy => &mut self.creepy,
        };
        *slot = value;
    }

    pub fn answered(&self) -> impl Iterator<Item = (Metric, u8)> + '_ {
        Metric::ALL
            .iter()
            .filter_map(|m| self.get(*m).map(|v| (*m, v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub user_id: String,
    pub ganimal_id: GanimalId,
    pub world_id: WorldId,
    /// Milliseconds; decides which of a user's answers is the latest.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morphology: Option<MorphologyAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratings: Option<SubjectiveRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub ganimal_id: GanimalId,
    pub metrics: Vec<Metric>,
    pub features: Vec<MorphologyFeature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Vote<T> {
    value: T,
    timestamp: u64,
    world: WorldId,
}

impl<T: PartialOrd + Copy> Vote<T> {
    /// Latest timestamp wins; equal timestamps resolve to the larger value
    /// so the outcome never depends on arrival order.
    fn supersedes(&self, other: &Vote<T>) -> bool {
        self.timestamp > other.timestamp
            || (self.timestamp == other.timestamp && self.value > other.value)
    }
}

fn upsert<T: PartialOrd + Copy>(slot: &mut BTreeMap<String, Vote<T>>, user: &str, vote: Vote<T>) {
    match slot.get_mut(user) {
        Some(existing) if vote.supersedes(existing) => *existing = vote,
        Some(_) => {}
        None => {
            slot.insert(user.to_string(), vote);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Consensus {
    pub fraction_true: Option<f64>,
    pub n: usize,
}

/// Outcome of a two-group comparison of per-ganimal mean ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub metric: Metric,
    pub predicate: String,
    pub n_with: usize,
    pub n_without: usize,
    pub mean_with: f64,
    pub mean_without: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

/// The genome-level predicates exposed for group comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryPredicate {
    ContainsDog,
    ContainsInsect,
}

impl CategoryPredicate {
    pub const ALL: [CategoryPredicate; 2] = [
        CategoryPredicate::ContainsDog,
        CategoryPredicate::ContainsInsect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryPredicate::ContainsDog => "contains_dog",
            CategoryPredicate::ContainsInsect => "contains_insect",
        }
    }

    /// True if any component carries the flag, whatever its weight.
    pub fn holds(self, genome: &Genome, taxonomy: &Taxonomy) -> bool {
        match self {
            CategoryPredicate::ContainsDog => genome.categories().any(|c| taxonomy.is_dog(c)),
            CategoryPredicate::ContainsInsect => genome.categories().any(|c| taxonomy.is_insect(c)),
        }
    }
}

impl FromStr for CategoryPredicate {
    type Err = CatalogueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CategoryPredicate::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| CatalogueError::UnknownPredicate(s.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationStore {
    genomes: BTreeMap<GanimalId, Genome>,
    ratings: BTreeMap<GanimalId, BTreeMap<Metric, BTreeMap<String, Vote<u8>>>>,
    morphology: BTreeMap<GanimalId, BTreeMap<MorphologyFeature, BTreeMap<String, Vote<bool>>>>,
}

impl AnnotationStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes a ganimal annotatable.
    pub fn register(&mut self, genome: &Genome) {
        self.genomes
            .entry(genome.id())
            .or_insert_with(|| genome.clone());
    }

    pub fn contains(&self, gid: &GanimalId) -> bool {
        self.genomes.contains_key(gid)
    }

    pub fn validate(&self, record: &AnnotationRecord) -> Result<(), CatalogueError> {
        if !self.contains(&record.ganimal_id) {
            return Err(CatalogueError::UnknownGanimal(record.ganimal_id));
        }
        let n_morph = record
            .morphology
            .as_ref()
            .map_or(0, |m| m.answered().count());
        let n_rated = record.ratings.as_ref().map_or(0, |r| r.answered().count());
        if n_morph + n_rated == 0 {
            return Err(CatalogueError::EmptyRecord);
        }
        if let Some(ratings) = &record.ratings {
            if let Some((metric, value)) = ratings
                .answered()
                .find(|(_, v)| !(RATING_MIN..=RATING_MAX).contains(v))
            {
                return Err(CatalogueError::RatingOutOfRange { metric, value });
            }
        }
        Ok(())
    }

    pub fn record_annotation(
        &mut self,
        record: &AnnotationRecord,
    ) -> Result<Acknowledgment, CatalogueError> {
        self.validate(record)?;
        let mut ack = Acknowledgment {
            ganimal_id: record.ganimal_id,
            metrics: Vec::new(),
            features: Vec::new(),
        };
        if let Some(ratings) = &record.ratings {
            let per_metric = self.ratings.entry(record.ganimal_id).or_default();
            for (metric, value) in ratings.answered() {
                let vote = Vote {
                    value,
                    timestamp: record.timestamp,
                    world: record.world_id,
                };
                upsert(per_metric.entry(metric).or_default(), &record.user_id, vote);
                ack.metrics.push(metric);
            }
        }
        if let Some(morphology) = &record.morphology {
            let per_feature = self.morphology.entry(record.ganimal_id).or_default();
            for (feature, value) in morphology.answered() {
                let vote = Vote {
                    value,
                    timestamp: record.timestamp,
                    world: record.world_id,
                };
                upsert(
                    per_feature.entry(feature).or_default(),
                    &record.user_id,
                    vote,
                );
                ack.features.push(feature);
            }
        }
        Ok(ack)
    }

    fn votes(&self, gid: &GanimalId, metric: Metric) -> impl Iterator<Item = &Vote<u8>> {
        self.ratings
            .get(gid)
            .and_then(|m| m.get(&metric))
            .into_iter()
            .flat_map(|users| users.values())
    }

    /// Mean over distinct users' latest ratings; `None` when unrated.
    pub fn mean_rating(&self, gid: &GanimalId, metric: Metric) -> Option<f64> {
        mean(self.votes(gid, metric).map(|v| v.value as f64))
    }

    /// Per-ganimal means using only ratings given inside `world`.
    pub fn world_means(&self, world: WorldId, metric: Metric) -> BTreeMap<GanimalId, f64> {
        self.ratings
            .keys()
            .filter_map(|gid| {
                let m = mean(
                    self.votes(gid, metric)
                        .filter(|v| v.world == world)
                        .map(|v| v.value as f64),
                )?;
                Some((*gid, m))
            })
            .collect()
    }

    /// Per-ganimal means over all worlds, for every rated ganimal.
    pub fn global_means(&self, metric: Metric) -> BTreeMap<GanimalId, f64> {
        self.ratings
            .keys()
            .filter_map(|gid| Some((*gid, self.mean_rating(gid, metric)?)))
            .collect()
    }

    pub fn morphology_consensus(&self, gid: &GanimalId, feature: MorphologyFeature) -> Consensus {
        let votes: Vec<bool> = self
            .morphology
            .get(gid)
            .and_then(|m| m.get(&feature))
            .into_iter()
            .flat_map(|users| users.values().map(|v| v.value))
            .collect();
        let n = votes.len();
        let fraction_true = (n > 0).then(|| votes.iter().filter(|v| **v).count() as f64 / n as f64);
        Consensus { fraction_true, n }
    }

    /// Welch comparison of per-ganimal means between ganimals for which
    /// `predicate` holds and those for which it does not.
    pub fn group_compare<F>(
        &self,
        metric: Metric,
        predicate_name: &str,
        predicate: F,
    ) -> Result<GroupComparison, CatalogueError>
    where
        F: Fn(&Genome) -> bool,
    {
        let mut with = Vec::new();
        let mut without = Vec::new();
        for (gid, m) in self.global_means(metric) {
            let genome = &self.genomes[&gid];
            if predicate(genome) {
                with.push(m);
            } else {
                without.push(m);
            }
        }
        if with.len() < 2 || without.len() < 2 {
            return Err(CatalogueError::InsufficientData {
                n_with: with.len(),
                n_without: without.len(),
            });
        }
        let test = welch_t_test(&with, &without).expect("both groups have two samples");
        Ok(GroupComparison {
            metric,
            predicate: predicate_name.to_string(),
            n_with: with.len(),
            n_without: without.len(),
            mean_with: mean(with.iter().copied()).expect("non-empty"),
            mean_without: mean(without.iter().copied()).expect("non-empty"),
            t_statistic: test.t_statistic,
            p_value: test.p_value,
        })
    }

    pub fn compare_by(
        &self,
        metric: Metric,
        predicate: CategoryPredicate,
        taxonomy: &Taxonomy,
    ) -> Result<GroupComparison, CatalogueError> {
        self.group_compare(metric, predicate.as_str(), |g| predicate.holds(g, taxonomy))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Welch's two-sample t-test with Welch-Satterthwaite degrees of freedom.
/// `None` unless both samples have at least two values.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let moments = |xs: &[f64]| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, var)
    };
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;

    if se2 == 0.0 {
        // Both samples constant.
        let df = na + nb - 2.0;
        return Some(if ma == mb {
            WelchTest {
                t_statistic: 0.0,
                degrees_of_freedom: df,
                p_value: 1.0,
            }
        } else {
            let t = if ma > mb {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            WelchTest {
                t_statistic: t,
                degrees_of_freedom: df,
                p_value: 0.0,
            }
        });
    }

    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Some(WelchTest {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
    })
}
