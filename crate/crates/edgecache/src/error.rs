use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}, line {line}: {reason}")]
    Parse {
        file: String,
        line: u64,
        reason: String,
    },
    #[error(transparent)]
    Sim(#[from] edgecache_core::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: u64, reason: impl Into<String>) -> Self {
        CliError::Parse {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }

    /// Process exit status: 2 for bad configuration, 3 for I/O and file
    /// format problems, 1 for anything the simulator itself rejects.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Sim(edgecache_core::Error::UnknownPolicy(_)) => 2,
            CliError::Io { .. } | CliError::Parse { .. } => 3,
            CliError::Sim(_) => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
