//! Corpus ingest, popularity labels, feature aggregation and the staged
//! pipeline that ties the analysis and model crates together.

pub mod artifacts;
pub mod config;
pub mod extract;
pub mod fdroid;
pub mod features;
pub mod ingest;
pub mod labeling;
pub mod pipeline;
pub mod synth;

use std::path::PathBuf;

use apppop_model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing {artifact}; run `apppop {command}` first")]
    MissingArtifact { artifact: PathBuf, command: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io { path: path.into(), source }
    }

    /// Process exit code: 1 config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::Config(_) => 1,
            CoreError::Data(_) | CoreError::Io { .. } | CoreError::MissingArtifact { .. } => 2,
            CoreError::Model(ModelError::InvalidHyper(_)) | CoreError::Model(ModelError::Unsupported { .. }) => 1,
            CoreError::Model(_) => 2,
            CoreError::Internal(_) => 3,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
