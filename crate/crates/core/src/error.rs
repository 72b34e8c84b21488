use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A query outside the range covered by the data.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A polyline handed to the zipper crosses itself.
    #[error("curve self-intersection at vertex {index}")]
    SelfIntersection { index: usize },

    /// A zipped vertex landed on the real line before the end of the curve.
    #[error("curve tip reaches the real line at vertex {index}")]
    PrematureTip { index: usize },

    /// Input is well formed but outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Hypotheses of a check are not met; the check was not run.
    #[error("refused: {}", reasons.join("; "))]
    Refused { reasons: Vec<String> },

    /// A numerical procedure failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// File or format problems, with the 1-based line where known.
    #[error("{}", match line { Some(l) => format!("line {l}: {message}"), None => message.clone() })]
    Format { line: Option<usize>, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
