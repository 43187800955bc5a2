//! Experiment harness for the 2D Dirac/Klein-Gordon lab: presets and TOML
//! configuration, deterministic runs with NDJSON/CSV diagnostics, and binary
//! snapshots with resume.

pub mod config;
pub mod ndjson;
pub mod runner;
pub mod snapshot;

use thiserror::Error;

/// Harness-level errors; the variant decides the process exit code
/// (validation 1, numerical 2, I/O 3).
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid config: {field}: {msg}")]
    Config { field: String, msg: String },

    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error("io: {0}")]
    Io(String),
}

impl LabError {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> LabError {
        LabError::Config { field: field.into(), msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } => 1,
            LabError::Numerics(_) => 2,
            LabError::Io(_) => 3,
        }
    }
}
