use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative linear radiance {value} at pixel {index}")]
    NegativeRadiance { index: usize, value: f64 },

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("no unmasked pixels available for {0}")]
    NoValidPixels(&'static str),

    #[error("empty raster stack")]
    EmptyStack,

    #[error("invalid raster: {0}")]
    InvalidGrid(String),

    #[error("malformed raster file {path}: {reason}")]
    MalformedRaster { path: PathBuf, reason: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("anchor unavailable for port {0}")]
    AnchorUnavailable(String),

    #[error("port {0} appears in both train and test partitions")]
    PortOverlap(String),

    #[error("region {0:?} not present in panel")]
    RegionAbsent(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage/config problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            _ => 2,
        }
    }
}
