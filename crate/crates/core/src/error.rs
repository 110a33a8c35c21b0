use std::fmt;
use std::path::PathBuf;

use crate::convex::ConvexSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid pool: {0}")]
    InvalidPool(String),

    #[error("token {token} is not part of {context}")]
    UnknownToken { token: String, context: String },

    #[error("amount must be a nonnegative finite number, got {0}")]
    InvalidAmount(f64),

    #[error("hops do not chain: {0}")]
    BrokenChain(String),

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("no CEX price for token {0}")]
    MissingPrice(String),

    #[error("infeasible flows: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} Newton steps")]
    NotConverged {
        iterations: usize,
        best: Box<ConvexSolution>,
    },

    #[error("{}: {} malformed record(s): {}", path.display(), errors.len(), join_errors(errors))]
    Parse {
        path: PathBuf,
        errors: Vec<RecordError>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One malformed line of an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// 1-based line number (record index + 1 for JSON arrays).
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn join_errors(errors: &[RecordError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
