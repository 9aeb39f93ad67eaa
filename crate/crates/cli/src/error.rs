//! Errors and exit codes of the harness.

use std::path::PathBuf;

use bcmac_core::channel::ChannelError;
use bcmac_core::channel_file::ChannelFileError;
use bcmac_core::region::RegionError;
use bcmac_core::rfid::RfidError;
use bcmac_core::sim::SimError;
use thiserror::Error;

use crate::table::TableError;

/// Exit code for validation and input errors.
pub const EXIT_INVALID: i32 = 1;
/// Exit code for configurations that cannot be realised.
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    ChannelFile {
        path: PathBuf,
        #[source]
        source: ChannelFileError,
    },
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("replay of {path} differs from the recorded payload")]
    ReplayMismatch { path: PathBuf },
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Rfid(#[from] RfidError),
    #[error(transparent)]
    Table(#[from] TableError),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        if e.is_infeasible() {
            CliError::Infeasible(e.to_string())
        } else {
            CliError::Sim(e)
        }
    }
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_INVALID,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
