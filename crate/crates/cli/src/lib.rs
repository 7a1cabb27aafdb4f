//! Batch front-end: JSON run configs in, CSV tables and a JSON summary out.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, CommandKind, ConfigError, Params, Problem, RunConfig};
pub use run::{run, write_error, Outcome, RunError};
