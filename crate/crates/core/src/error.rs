//! Crate-wide error type with the category labels used by the CLI contract.

use thiserror::Error;

/// Errors raised by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/frame shapes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A configuration (network plan, training setup) is invalid.
    #[error("config error: {0}")]
    Config(String),
    /// An API was called in a way its contract forbids.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data is missing, malformed, or inconsistent.
    #[error("input error: {0}")]
    Input(String),
    /// A stored artifact fails its length/checksum checks.
    #[error("integrity error: {0}")]
    Integrity(String),
    /// A bitstream cannot be parsed.
    #[error("decode error: {0}")]
    Decode(String),
    /// Non-finite values or other numeric failures.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The external codec backend failed.
    #[error("backend error: {0}")]
    Backend(String),
    /// Model/checkpoint mismatch (wrong digest, wrong architecture).
    #[error("model error: {0}")]
    Model(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Machine-parseable category, used for the `ERROR:<category>:` prefix.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::Input(_) => "input",
            Error::Integrity(_) => "integrity",
            Error::Decode(_) => "decode",
            Error::Numeric(_) => "numeric",
            Error::Backend(_) => "backend",
            Error::Model(_) => "model",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code per the CLI contract: 1 usage, 2 input/format,
    /// 3 numeric/backend/model.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            Error::Dimension(_)
            | Error::Input(_)
            | Error::Integrity(_)
            | Error::Decode(_)
            | Error::Io(_) => 2,
            Error::Numeric(_) | Error::Backend(_) | Error::Model(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
