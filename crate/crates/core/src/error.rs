//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by any operation in this crate.
///
/// Variants are grouped by how a caller should react: configuration and
/// argument problems, data-file problems, and external-service failures.
/// The CLI maps these groups onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // -- configuration / argument validation --------------------------------
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("budget {budget} is off the grid (window {window}, max {max})")]
    BudgetOffGrid { budget: u32, window: u32, max: u32 },

    #[error("budget {budget} is below the minimum window of {window} tokens")]
    BudgetTooSmall { budget: u32, window: u32 },

    #[error("instance too large for the exact solver: {cells} table cells exceeds {limit}")]
    GuardExceeded { cells: u128, limit: u128 },

    #[error("no feasible allocation: {0}")]
    Infeasible(String),

    // -- data ----------------------------------------------------------------
    #[error("{path}: i/o error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {msg}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("profile for `{id}` has {got} entries, expected {expected}")]
    ProfileLength { id: String, got: usize, expected: usize },

    #[error("profile for `{id}` has probability {value} outside [0, 1] at entry {index}")]
    ProbOutOfRange { id: String, index: usize, value: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("record `{0}` has no profile")]
    MissingProfile(String),

    #[error("record `{0}` has no difficulty label")]
    MissingLabel(String),

    #[error("record `{id}` is missing required field `{field}`")]
    MissingField { id: String, field: &'static str },

    #[error("no accuracy curve for class `{0}` with nonzero proportion")]
    MissingCurve(String),

    #[error("id mismatch between inputs: {0}")]
    IdMisalignment(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("zero variance in {0}; correlation is undefined")]
    ZeroVariance(String),

    #[error("failed to parse model response: {0}")]
    ResponseParse(String),

    // -- external services ----------------------------------------------------
    #[error("generation client error: {0}")]
    Client(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by malformed or inconsistent input data
    /// (as opposed to bad arguments or a failing external service).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedLine { .. }
                | Error::DuplicateId(_)
                | Error::ProfileLength { .. }
                | Error::ProbOutOfRange { .. }
                | Error::EmptyBatch
                | Error::MissingProfile(_)
                | Error::MissingLabel(_)
                | Error::MissingField { .. }
                | Error::MissingCurve(_)
                | Error::IdMisalignment(_)
                | Error::ShapeMismatch(_)
                | Error::NonFinite(_)
                | Error::ZeroVariance(_)
                | Error::ResponseParse(_)
        )
    }

    /// True for failures of an external generation service.
    pub fn is_client_error(&self) -> bool {
        matches!(self, Error::Client(_))
    }
}
