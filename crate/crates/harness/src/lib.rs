//! Experiment runner for `efpp`: parses a command line or TOML config into an
//! [`ExperimentSpec`], runs its replicates on a worker pool and emits one JSON
//! record per replicate plus a summary.

pub mod config;
pub mod record;
pub mod run;

pub use config::{parse_cli, CliError, ExperimentSpec, Kind, Settings, UsageError};
pub use record::{ReplicateRecord, Summary, Table};
pub use run::{run_experiment, write_outputs, RunOutput};
