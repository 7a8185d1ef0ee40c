use thiserror::Error;

/// Errors raised by the library layer.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input (unknown taxa, bad tree shape, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Data that cannot have been produced by the declared observation model.
    #[error("data inconsistent with observation model: {0}")]
    DataInconsistency(String),

    /// Text format errors, with a 1-based line (and column where known).
    #[error("parse error at line {line}{}: {msg}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        col: Option<usize>,
        msg: String,
    },

    /// Run configuration that cannot be satisfied.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            col: None,
            msg: msg.into(),
        }
    }
}
