//! Engine for breeding and curating hybrid animals ("ganimals") drawn from a
//! generative model's animal categories.
//!
//! A ganimal is identified by its [`Genome`]: a convex mixture of animal
//! categories plus a truncation value and a noise seed. Everything else in
//! this crate operates on genomes and their content ids:
//!
//! - [`taxonomy`] loads the 396-category animal universe, its species
//!   grouping and the five recipe cores.
//! - [`genome`] implements the pair/quad blend algebra, canonical ids and
//!   possibility-space counting.
//! - [`sampler`] is the discovery policy: a fixed mixture of recipe,
//!   uniform and species-stratified exploration with rank-weighted
//!   leaderboard exploitation.
//! - [`ecology`] holds isolated worlds with seed sets, feeding and decay.
//! - [`catalogue`] stores crowd annotations and runs Welch group comparisons.
//! - [`render`] is the image-backend boundary: wire protocol, a procedural
//!   mock backend and a content-addressed render cache.
//!
//! All randomness flows through [`DrawRng`], a pinned ChaCha8 stream, so a
//! fixed seed replays identically across runs and platforms.

pub mod catalogue;
pub mod ecology;
pub mod genome;
pub mod render;
pub mod rng;
pub mod sampler;
pub mod taxonomy;

mod decimal;

pub use catalogue::{
    AnnotationRecord, AnnotationStore, CatalogueError, CategoryPredicate, GroupComparison, Metric,
    MorphologyAnnotation, MorphologyFeature, SubjectiveRating,
};
pub use decimal::format_g17;
pub use ecology::{EcologyError, EnergyParams, EnergyState, LayoutVariant, World, WorldId};
pub use genome::{
    CategoryId, Component, GanimalId, Generation, Genome, GenomeError, NoiseRule, SpaceCounts,
    TruncationRule,
};
pub use render::{
    BackendError, Capabilities, DirImageStore, GeneratorBackend, ImageRef, ImageStore,
    MemoryImageStore, MockBackend, RenderCache, RenderError, RenderRequest, RenderedImage,
    RetryPolicy,
};
pub use rng::DrawRng;
pub use sampler::{
    Characteristic, DiscoveryResult, PolicyMix, Procedure, SamplerConfig, SamplerError,
};
pub use taxonomy::{Category, CoreName, Taxonomy, TaxonomyError};
