use thiserror::Error;

use crate::bundle::ValidationReport;

/// Invalid learning-curve parameter, naming the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid curve field `{field}`: {reason}")]
pub struct CurveError {
    pub field: String,
    pub reason: String,
}

impl CurveError {
    pub(crate) fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bundle:\n{0}")]
    Validation(ValidationReport),

    #[error(transparent)]
    Curve(#[from] CurveError),

    /// A strategy or run configuration that cannot be executed.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller asked for something outside an operation's domain.
    #[error("usage error: {0}")]
    Usage(String),

    /// A strategy emitted a row whose fractions exceed the data-throughput cap.
    #[error("budget violation at timeslot {timeslot}: allocated {allocated} > cap {cap}")]
    BudgetViolation {
        timeslot: usize,
        allocated: f64,
        cap: f64,
    },

    #[error("allocation row for timeslot {timeslot} references unknown thread {thread}")]
    UnknownThread { timeslot: usize, thread: u32 },

    #[error(
        "instance too large for exhaustive search: K={threads}, T={horizon}, Q={quantum} \
         (limits K<={max_threads}, T<={max_horizon}, Q<={max_quantum})"
    )]
    OracleLimit {
        threads: usize,
        horizon: usize,
        quantum: u32,
        max_threads: usize,
        max_horizon: usize,
        max_quantum: u32,
    },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
