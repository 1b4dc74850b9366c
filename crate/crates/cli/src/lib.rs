//! Command-line and HTTP front ends for the extract-method assistant.

pub mod commands;
pub mod config;
pub mod server;

pub use commands::CliError;
pub use config::{AppConfig, Overrides, ProviderMode};
