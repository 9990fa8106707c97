//! Configuration files, the binary map container, dataset generation and the
//! JSON reports behind the command-line tool.

mod config;
mod dataset;
mod mapfile;
mod report;

pub use config::{Config, DatasetConfig, GridConfig, PumpConfig, SteadyConfig, TlsConfig, TransmonConfig, CONFIG_VERSION};
pub use dataset::{
    generate_dataset, read_manifest, sample_tls, DatasetPlan, DatasetRecord, TlsLabel, MANIFEST_FILE, PRNG_NAME,
};
pub use mapfile::{read_map, write_map, GeneratorInfo, MapFile, MapHeader, MAP_FORMAT_VERSION, MAP_MAGIC};
pub use report::{estimate_report, steady_report, EstimateReport, SteadyReport};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::lindblad::LindbladError;
use crate::model::ModelError;
use crate::protocol::ProtocolError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("{}: not a map file: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

impl IoError {
    pub fn file(path: &Path, source: std::io::Error) -> Self {
        Self::File {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 for invalid input, 2 for unreadable or unwritable
    /// files, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Invalid { .. } | Self::Model(_) => 1,
            Self::File { .. } | Self::Format { .. } | Self::Json(_) => 2,
            Self::Protocol(ProtocolError::Model(_) | ProtocolError::InvalidGrid(_)) => 1,
            Self::Protocol(_) | Self::Lindblad(_) => 3,
            Self::Analytics(AnalyticsError::InvalidArgument { .. } | AnalyticsError::Model(_)) => 1,
            Self::Analytics(_) => 3,
        }
    }
}
