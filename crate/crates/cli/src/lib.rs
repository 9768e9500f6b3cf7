//! Library side of the `snskit` binary: configuration, formatting and the
//! built-in benchmarks. Kept separate so integration tests can call it.

pub mod config;
pub mod output;
pub mod tables;

use std::path::PathBuf;

use config::{ConfigError, LoadError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const ZERO_RATE: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Core(#[from] snskit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Read { .. } => exit::CONFIG,
            CliError::Write { .. } => exit::IO,
            // Invalid arguments reaching the core come from the configuration.
            CliError::Core(
                snskit::Error::InvalidArgument { .. } | snskit::Error::UnknownStrategy(_),
            ) => exit::CONFIG,
            CliError::Core(_) => 1,
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(path, source) => CliError::Read { path, source },
            LoadError::Config(c) => CliError::Config(c),
        }
    }
}
