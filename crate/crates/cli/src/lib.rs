//! Command-line pipeline: synthesize or load a cohort, train the three
//! models, pick the escalation threshold, evaluate, route and explain.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{CliError, Result};
