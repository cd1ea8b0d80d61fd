//! Command-line front end: configuration, dispatch and output.

pub mod commands;
pub mod config;

pub use commands::{run_command, Artifact, Command, Overrides, Table};
pub use config::{parse_config, parse_config_str, Format, Method, RunConfig};
