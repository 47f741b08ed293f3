use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event packet is empty")]
    EmptyPacket,

    #[error("{} event(s) outside the {width}x{height} sensor, first at index {}", indices.len(), indices.first().copied().unwrap_or(0))]
    OutOfBounds { indices: Vec<usize>, width: usize, height: usize },

    #[error("negative weight {value} at event {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("greedy initialization could not improve contrast for cluster {cluster}")]
    DegenerateInit { cluster: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}: missing '# width W height H' geometry header")]
    MissingGeometry { path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
