//! Configuration loading, command implementations and output writers behind
//! the `nonplanar` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_compare, cmd_raceline, cmd_simulate, CliError, SimulateSettings};
pub use config::{load_configs, ConfigError, RunConfig, RunPaths};
