//! The ganimals platform service.
//!
//! [`Platform`] owns the event-sourced state and exposes every operation;
//! [`http::router`] puts it behind a JSON API and [`simulate::run`] drives it
//! with synthetic users. Rendering goes through a [`GeneratorBackend`]: the
//! built-in mock, or a remote worker speaking the protocol in [`worker`].
//!
//! [`GeneratorBackend`]: ganimals_core::GeneratorBackend

pub mod config;
pub mod events;
pub mod http;
pub mod platform;
pub mod simulate;
pub mod state;
pub mod worker;

pub use config::{ConfigError, ServiceConfig, SimulationSettings};
pub use events::{Event, EventKind, EventLog, FileLog, MemoryLog};
pub use platform::{Clock, ManualClock, Platform, PlatformError, SystemClock};
pub use simulate::{SimulationReport, SimulationRun};
pub use state::{Ganimal, PlatformState};
pub use worker::{worker_router, WorkerBackend};
