//! Experiment runner for transmit-beamspace DOA studies: configuration,
//! method construction, Monte Carlo sweeps, CSV output and invariant checks.

pub mod config;
pub mod methods;
pub mod output;
pub mod sweep;
pub mod verify;

pub use config::{EstimatorKind, ExperimentConfig, Method};
pub use sweep::{run_sweep, SweepResult};
