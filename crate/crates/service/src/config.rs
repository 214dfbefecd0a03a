//! Service configuration: a JSON file plus `GANIMALS_*` environment overrides.
//!
//! | variable | field |
//! |---|---|
//! | `GANIMALS_BIND` | `bind` |
//! | `GANIMALS_DATA_DIR` | `data_dir` |
//! | `GANIMALS_MASTER_SEED` | `master_seed` |
//! | `GANIMALS_N_WORLDS` | `n_worlds` |
//! | `GANIMALS_SEED_SET_SIZE` | `seed_set_size` |
//! | `GANIMALS_LEADERBOARD_K` | `leaderboard_k` |
//! | `GANIMALS_TICK_INTERVAL_SECS` | `tick_interval_secs` |
//! | `GANIMALS_BACKEND_URL` | `backend_url` (empty string selects the mock) |
//! | `GANIMALS_RESOLUTION` | `resolution` |
//! | `GANIMALS_RENDER_RETRIES` | `render_retries` |
//! | `GANIMALS_SNAPSHOT_EVERY` | `snapshot_every` |
//! | `GANIMALS_TAXONOMY_PATH` / `GANIMALS_CORES_PATH` | taxonomy files |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ganimals_core::ecology::EnergyParams;
use ganimals_core::render::RetryPolicy;
use ganimals_core::{PolicyMix, SamplerConfig, Taxonomy, TaxonomyError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "GANIMALS_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("environment variable {name}: cannot parse `{value}`")]
    Env { name: String, value: String },
    #[error("unknown environment variable {0}")]
    UnknownEnv(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    pub master_seed: u64,
    pub n_worlds: u32,
    pub seed_set_size: usize,
    pub mix: PolicyMix,
    pub leaderboard_k: usize,
    pub truncation: f64,
    pub energy: EnergyParams,
    /// Seconds between automatic ticks; 0 disables the ticker.
    pub tick_interval_secs: u64,
    /// GAN worker base URL; `None` renders with the built-in mock.
    pub backend_url: Option<String>,
    pub backend_timeout_ms: u64,
    pub resolution: u32,
    pub max_resolution: u32,
    pub render_retries: u32,
    pub render_backoff_ms: u64,
    /// Write a snapshot after this many events; 0 disables snapshots.
    pub snapshot_every: u64,
    pub fsync: bool,
    pub taxonomy_path: Option<PathBuf>,
    pub cores_path: Option<PathBuf>,
    /// Used only by `simulate`.
    pub simulation: SimulationSettings,
}

/// Probabilities of each synthetic-user action per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionMix {
    pub discover: f64,
    pub feed: f64,
    pub annotate: f64,
    pub breed: f64,
}

impl Default for ActionMix {
    fn default() -> Self {
        ActionMix {
            discover: 0.4,
            feed: 0.3,
            annotate: 0.25,
            breed: 0.05,
        }
    }
}

/// Taste of the synthetic users living in one world. A ganimal's appeal is
/// `exp(dog_affinity * dog_mass + insect_affinity * insect_mass)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentProfile {
    pub name: String,
    #[serde(default)]
    pub dog_affinity: f64,
    #[serde(default)]
    pub insect_affinity: f64,
}

impl AgentProfile {
    pub fn uniform(name: &str) -> Self {
        AgentProfile {
            name: name.to_string(),
            dog_affinity: 0.0,
            insect_affinity: 0.0,
        }
    }
}

/// Rating model of synthetic users: `base + dog_shift [dog] + insect_shift
/// [insect] + noise_sd * N(0, 1)`, rounded and clamped to 1..=7.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedEffects {
    pub cute_base: f64,
    pub dog_cute_shift: f64,
    pub insect_cute_shift: f64,
    pub noise_sd: f64,
}

impl Default for PlantedEffects {
    fn default() -> Self {
        PlantedEffects {
            cute_base: 4.0,
            dog_cute_shift: 1.5,
            insect_cute_shift: -1.5,
            noise_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Render resolution for simulated ganimals.
    pub resolution: u32,
    /// Steps between world ticks.
    pub tick_every: u64,
    pub actions: ActionMix,
    /// Profile of world `i` is `profiles[i % len]`.
    pub profiles: Vec<AgentProfile>,
    pub effects: PlantedEffects,
    /// Discoveries each user remembers as feed/annotate candidates.
    pub memory: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            resolution: 32,
            tick_every: 10,
            actions: ActionMix::default(),
            profiles: vec![
                AgentProfile {
                    name: "dog_lovers".into(),
                    dog_affinity: 3.0,
                    insect_affinity: 0.0,
                },
                AgentProfile::uniform("uniform"),
                AgentProfile {
                    name: "insect_averse".into(),
                    dog_affinity: 0.0,
                    insect_affinity: -3.0,
                },
                AgentProfile::uniform("uniform_b"),
            ],
            effects: PlantedEffects::default(),
            memory: 16,
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self, max_resolution: u32) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(format!("simulation: {m}")));
        if self.resolution == 0 || self.resolution > max_resolution {
            return invalid(format!("resolution {} out of range", self.resolution));
        }
        if self.tick_every == 0 {
            return invalid("tick_every must be at least 1".into());
        }
        let a = self.actions;
        let parts = [a.discover, a.feed, a.annotate, a.breed];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return invalid("action probabilities must be non-negative and sum to 1".into());
        }
        if self.profiles.is_empty() {
            return invalid("at least one agent profile is required".into());
        }
        if self
            .profiles
            .iter()
            .any(|p| !(p.dog_affinity.is_finite() && p.insect_affinity.is_finite()))
        {
            return invalid("affinities must be finite".into());
        }
        let e = self.effects;
        if !(e.cute_base.is_finite()
            && e.dog_cute_shift.is_finite()
            && e.insect_cute_shift.is_finite()
            && e.noise_sd.is_finite()
            && e.noise_sd >= 0.0)
        {
            return invalid("planted effects must be finite with noise_sd >= 0".into());
        }
        Ok(())
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("ganimals-data"),
            master_seed: 0,
            n_worlds: 4,
            seed_set_size: ganimals_core::ecology::DEFAULT_SEED_SET_SIZE,
            mix: PolicyMix::default(),
            leaderboard_k: 10,
            truncation: ganimals_core::genome::DEFAULT_TRUNCATION,
            energy: EnergyParams::default(),
            tick_interval_secs: 3600,
            backend_url: None,
            backend_timeout_ms: 30_000,
            resolution: ganimals_core::render::DEFAULT_RESOLUTION,
            max_resolution: 1024,
            render_retries: 2,
            render_backoff_ms: 200,
            snapshot_every: 1000,
            fsync: false,
            taxonomy_path: None,
            cores_path: None,
            simulation: SimulationSettings::default(),
        }
    }
}

fn parse<T: FromStr>(name: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env {
        name: name.to_string(),
        value: value.to_string(),
    })
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// File (or defaults), then process environment, then validation.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => ServiceConfig::from_file(p)?,
            None => ServiceConfig::default(),
        };
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `GANIMALS_*` pairs; other variables are ignored.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (name, value) in vars {
            let (name, value) = (name.as_ref(), value.as_ref());
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match key {
                "BIND" => self.bind = value.to_string(),
                "DATA_DIR" => self.data_dir = PathBuf::from(value),
                "MASTER_SEED" => self.master_seed = parse(name, value)?,
                "N_WORLDS" => self.n_worlds = parse(name, value)?,
                "SEED_SET_SIZE" => self.seed_set_size = parse(name, value)?,
                "LEADERBOARD_K" => self.leaderboard_k = parse(name, value)?,
                "TICK_INTERVAL_SECS" => self.tick_interval_secs = parse(name, value)?,
                "BACKEND_URL" => {
                    self.backend_url = Some(value.trim().to_string()).filter(|v| !v.is_empty())
                }
                "RESOLUTION" => self.resolution = parse(name, value)?,
                "RENDER_RETRIES" => self.render_retries = parse(name, value)?,
                "SNAPSHOT_EVERY" => self.snapshot_every = parse(name, value)?,
                "FSYNC" => self.fsync = parse(name, value)?,
                "TAXONOMY_PATH" => self.taxonomy_path = Some(PathBuf::from(value)),
                "CORES_PATH" => self.cores_path = Some(PathBuf::from(value)),
                // Read by the logger, not by the service.
                "LOG" => {}
                _ => return Err(ConfigError::UnknownEnv(name.to_string())),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.n_worlds == 0 {
            return invalid("n_worlds must be at least 1".into());
        }
        self.mix
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.leaderboard_k == 0 {
            return invalid("leaderboard_k must be at least 1".into());
        }
        if !(self.truncation > 0.0 && self.truncation <= 1.0) {
            return invalid(format!("truncation {} outside (0, 1]", self.truncation));
        }
        self.energy.validate().map_err(ConfigError::Invalid)?;
        if self.resolution == 0 || self.resolution > self.max_resolution {
            return invalid(format!(
                "resolution {} must be in 1..={}",
                self.resolution, self.max_resolution
            ));
        }
        if let Some(url) = &self.backend_url {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return invalid(format!("backend_url `{url}` is not an http(s) URL"));
            }
        }
        if self.taxonomy_path.is_some() != self.cores_path.is_some() {
            return invalid("taxonomy_path and cores_path must be set together".into());
        }
        self.simulation.validate(self.max_resolution)?;
        Ok(())
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            mix: self.mix,
            leaderboard_k: self.leaderboard_k,
            truncation: self.truncation,
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            retries: self.render_retries,
            backoff_ms: self.render_backoff_ms,
        }
    }

    pub fn taxonomy(&self) -> Result<Taxonomy, ConfigError> {
        match (&self.taxonomy_path, &self.cores_path) {
            (Some(categories), Some(cores)) => Ok(Taxonomy::load(categories, cores)?),
            _ => Ok(Taxonomy::bundled()),
        }
    }
}
