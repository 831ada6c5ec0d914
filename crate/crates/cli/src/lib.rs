//! Configuration parsing and the task driver behind the `dimerbath` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{run, RunError, RunOutcome, Status};
