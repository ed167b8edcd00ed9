use thiserror::Error;

use crate::grid::Coord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("pass at t={t} is not after the previous pass at t={last}")]
    Ordering { t: f64, last: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data for cell {cell}: need at least one pass after the epoch")]
    InsufficientData { cell: Coord },

    #[error("interval error: s={s} is after t={t}")]
    Interval { s: f64, t: f64 },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("topology error: free space has {components} connected components")]
    Topology { components: usize },

    #[error("infeasible: {robots} robots for {cells} free cells")]
    Infeasible { robots: usize, cells: usize },

    #[error("no unvisited vertex left to start from")]
    Exhausted,

    #[error("partition failed on region {region}: {reason} ({assigned} cells assigned)")]
    PartitionFailure {
        region: usize,
        reason: String,
        assigned: usize,
    },

    #[error("route branching exceeded the cap of {cap} branches")]
    BranchingOverflow { cap: usize },

    #[error("degenerate scenario: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
