use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulate / separate / verify chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A collagen query fell outside the padded z-support of the generated field.
    #[error("z = {z} is outside the field support [{min}, {max}]; increase the padding")]
    OutOfSupport { z: f64, min: f64, max: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// No change point exists in the total-variation profile.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the command-line front-end.
    ///
    /// 2 = configuration or argument error, 3 = degenerate separation, 4 = I/O or integrity error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::OutOfSupport { .. } => 2,
            Error::DegenerateInput(_) | Error::DegenerateFit(_) => 3,
            Error::Format { .. } | Error::Integrity(_) | Error::Io { .. } => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
