//! Configuration-driven experiment runner for `ksstrip-core`.

pub mod config;
pub mod experiment;

pub use config::{keys_help, load, serialize, validate_config, ConfigErrors, ConfigIssue, Experiment, ExperimentConfig, RawConfig};
pub use experiment::{run_experiment, RunError, RunReport, OUTPUT_ROOT_VAR, VERSION};
