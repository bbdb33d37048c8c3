//! Command implementations behind the `bellowsense` binary. Each command
//! validates its [`RunConfig`], writes the resolved config next to its
//! outputs and returns a typed report.

mod commands;
mod config;

pub use commands::*;
pub use config::{RunConfig, CONFIG_ECHO};
