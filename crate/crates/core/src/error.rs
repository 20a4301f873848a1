use thiserror::Error;

use crate::engine::RunResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed variables, events or trees.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameters: {0}")]
    Params(String),

    /// An explicit tape ran out of bits. `partial` carries the run state at
    /// the moment of exhaustion when the caller was the resampling engine.
    #[error("tape exhausted after {bits} bits")]
    TapeExhausted { bits: usize, partial: Option<Box<RunResult>> },

    /// Work refused because it exceeds a configured guard.
    #[error("budget refused: {0}")]
    Budget(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("family enumeration failed: {0}")]
    Family(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("gave up after {0} steps")]
    Timeout(u64),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
