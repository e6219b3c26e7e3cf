use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation
    /// (zero-norm vector, non-positive illuminant, out-of-bounds mask, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-side contract was violated (dimension mismatch, empty input, k > n, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The gradient of an arccos/sin-type loss is undefined because the
    /// prediction is (anti)parallel to the target.
    #[error("singular angle: sin(eps) = {sin:e} is below the floor {floor:e}")]
    SingularAngle { sin: f64, cos: f64, floor: f64 },

    /// The image statistic used by an estimator vanished in at least one channel.
    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
