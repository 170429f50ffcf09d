//! Batch front-end: TOML configuration, the `solve`, `verify`, `convergence`,
//! `conditioning` and `selftest` commands, and their JSON/CSV reports.

pub mod commands;
pub mod config;
pub mod selftest;

pub use commands::{run, CliError, Outcome, RunOptions};
pub use config::{Command, RunConfig};
