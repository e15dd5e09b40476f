//! File formats and persistence: dataset ingestion (edge lists, feature CSV,
//! label TSV, split JSON, checksummed manifests) and model checkpoints.
//!
//! Loaders reject rather than repair; every parse error carries the file and
//! line it came from. All numeric text uses 17-significant-digit decimals so
//! 64-bit floats round-trip exactly.

mod checkpoint;
mod dataset;
mod text;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use dataset::{
    load_dataset, load_features, load_graph, load_labels, load_split, save_dataset, write_edges,
    DatasetManifest, FileEntry,
};
pub use text::{format_f64, parse_f64, sha256_file};

use std::path::PathBuf;

use thiserror::Error;

use crate::estimator::TrainError;
use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("{path}: checksum mismatch (expected {expected}, found {found})")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("json error on {path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error(transparent)]
    Train(#[from] TrainError),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        DataError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        DataError::File {
            path: path.into(),
            message: message.into(),
        }
    }
}
