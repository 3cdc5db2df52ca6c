//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by tensor construction, fitting, clustering, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An edge event refers to a node or time index outside the declared shape.
    #[error("edge event ({src}, {dst}, t={t}) outside tensor of {node_count} nodes, horizon {horizon}")]
    EventOutOfBounds {
        src: usize,
        dst: usize,
        t: usize,
        node_count: usize,
        horizon: usize,
    },

    /// A self-loop event was supplied to a tensor that disallows them.
    #[error("self-loop event ({node}, {node}, t={t}) but self-loops are disallowed")]
    SelfLoopDisallowed { node: usize, t: usize },

    /// A time index outside `0..horizon`.
    #[error("time index {t} outside horizon {horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },

    /// A requested decomposition rank outside `1..=min(node_count, horizon)`.
    #[error("rank {rank} outside valid range 1..={max} for this tensor")]
    RankOutOfRange { rank: usize, max: usize },

    /// A numeric quantity became NaN or infinite mid-computation.
    #[error("non-finite value in {stage} at sweep {sweep}")]
    NonFinite { stage: &'static str, sweep: usize },

    /// Core consistency is undefined because the loading matrices are rank-deficient.
    #[error("core consistency undefined: {reason}")]
    CoreConsistencyUndefined { reason: String },

    /// Generic invalid-argument rejection; the message names the argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An input collection did not satisfy a size or content precondition.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A malformed line in an edge-event CSV file.
    #[error("CSV parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    /// A pipeline stage failed; wraps the underlying error with the stage name.
    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
