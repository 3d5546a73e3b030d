use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A density was evaluated at or outside the open support `(lo, hi)`.
    #[error("{value} is outside the open support ({lo}, {hi})")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("peaks not found: {0}")]
    PeaksNotFound(String),

    #[error("untrusted interval unreachable: {0}")]
    Unreachable(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Domain { .. } => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::PeaksNotFound(_) => "peaks_not_found",
            Error::Unreachable(_) => "unreachable",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
