use std::path::PathBuf;

use thiserror::Error;

use crate::game::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model is invalid:\n{0}")]
    InvalidModel(ValidationReport),

    #[error("malformed model: {0}")]
    Malformed(String),

    #[error("incomplete strategy: no choice for reachable state `{state}`")]
    IncompleteStrategy { state: String },

    #[error("strategy does not match model: {0}")]
    StrategyMismatch(String),

    #[error("fixed point not reached after {sweeps} sweeps (residual {residual:e})")]
    FixedPointNotReached { sweeps: usize, residual: f64 },

    #[error("no strategies given")]
    NoStrategies,

    #[error("ill-defined instantiation: {}", format_offending(.0))]
    IllDefined(Vec<OffendingEntry>),

    #[error("expression of degree {0} is not supported (affine only)")]
    UnsupportedDegree(usize),

    #[error("no sufficiently strong strategy found (best value seen {best_value})")]
    NoStrongStrategy { best_value: f64 },

    #[error("enumeration guard exceeded: {size} deceiver strategies")]
    EnumerationTooLarge { size: u128 },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("internal solver error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 2,
            Error::InvalidModel(_)
            | Error::Malformed(_)
            | Error::StrategyMismatch(_)
            | Error::IncompleteStrategy { .. }
            | Error::IllDefined(_)
            | Error::UnsupportedDegree(_)
            | Error::Json(_) => 3,
            Error::NoStrongStrategy { .. } | Error::NoStrategies => 4,
            Error::FixedPointNotReached { .. }
            | Error::EnumerationTooLarge { .. }
            | Error::Internal(_)
            | Error::Io { .. } => 5,
        }
    }
}

/// A transition (or row) of an instantiated model that is not a probability.
#[derive(Clone, Debug, PartialEq)]
pub struct OffendingEntry {
    pub state: String,
    /// `None` when the whole row fails to sum to one.
    pub successor: Option<String>,
    pub value: f64,
}

fn format_offending(entries: &[OffendingEntry]) -> String {
    entries
        .iter()
        .map(|e| match &e.successor {
            Some(succ) => format!("P({} -> {}) = {}", e.state, succ, e.value),
            None => format!("row sum at {} = {}", e.state, e.value),
        })
        .collect::<Vec<_>>()
        .join(", ")
}
