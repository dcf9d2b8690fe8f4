use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("unknown scenario `{name}` (available: {})", available.join(", "))]
    UnknownScenario { name: String, available: Vec<String> },

    #[error(transparent)]
    Bundle(#[from] BundleError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Failures while reading or writing a trajectory bundle. Each kind is kept
/// distinct so callers can tell a corrupt file from an incomplete bundle.
#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("shape mismatch in {}: {detail}", path.display())]
    ShapeMismatch { path: PathBuf, detail: String },

    #[error("bad magic in {}: expected BSKA", .0.display())]
    BadMagic(PathBuf),

    #[error("unsupported version {found} in {} (expected {expected})", path.display())]
    VersionMismatch { path: PathBuf, found: u16, expected: u16 },

    #[error("unsupported dtype {found} in {}", path.display())]
    UnsupportedDtype { path: PathBuf, found: u16 },

    #[error("invalid manifest {}: {detail}", path.display())]
    InvalidManifest { path: PathBuf, detail: String },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
