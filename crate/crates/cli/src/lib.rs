//! Config-driven experiment runner for the two-ion crystal simulator:
//! parse a declarative TOML config, dispatch to the matching experiment,
//! and emit machine-readable tables.

pub mod config;
pub mod demo;
pub mod output;
pub mod run;

pub use config::{load, parse_config, resolve, ConfigError, Experiment, ResolvedConfig};
pub use output::{emit, Cell, OutputFormat, RunOutput, Table};
pub use run::{run, RunError};
