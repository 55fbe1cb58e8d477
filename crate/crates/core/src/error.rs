use thiserror::Error;

/// Errors raised by the calibration, evaluation and I/O layers.
///
/// Variants fall into two families: malformed input ([`Error::Input`],
/// [`Error::Io`], parse failures) and inputs that are individually well
/// formed but inconsistent with each other ([`Error::Validation`],
/// [`Error::EmptyStratum`]). The CLI maps the first family to exit code 2
/// and the second to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("empty calibration stratum: {0}")]
    EmptyStratum(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by inputs that disagree with each other
    /// rather than inputs that are malformed on their own.
    pub fn is_consistency(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::EmptyStratum(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
