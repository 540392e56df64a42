//! Configuration, persistence, scheduling and verification for the band-matrix experiments.

pub mod config;
pub mod error;
pub mod manifest;
pub mod rows;
pub mod run;
pub mod verify;

pub use config::{Experiment, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use manifest::RunManifest;
pub use run::{replay, run, RunOptions, RunOutcome, RunStatus};

/// Version of every JSON document the harness writes.
pub const SCHEMA_VERSION: u32 = 1;
