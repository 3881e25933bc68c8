//! Experiment harness behind the `rfnse` binary.

pub mod commands;
pub mod config;

pub use commands::{run, CliError, Command};
pub use config::{ConfigError, RawConfig, RunConfig};
