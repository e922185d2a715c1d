//! Experiment orchestration for sharpkit: TOML configs, CSV datasets,
//! seeded sweeps and plot-ready CSV reports.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod sweep;

pub use config::{DatasetConfig, ExperimentConfig, LandscapeConfig, ModelConfig, RunSpec};
pub use error::{HarnessError, Result};
pub use sweep::{run_cell, run_sweep, SweepReport};
