//! Experiment files, dispatch and report files for the `kirchhoff-lab`
//! command.

pub mod config;
pub mod runner;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use runner::{execute, run_experiment, Artifacts, Report};
