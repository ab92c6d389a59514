use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A graph specification field violates its invariant. Carries the field name.
    #[error("invalid spec: {0}")]
    InvalidSpec(&'static str),

    #[error("task ({step}, {point}) is outside the graph")]
    OutOfBounds { step: usize, point: usize },

    #[error("invalid backend configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("clock cannot resolve the smallest timed run ({ticks} ticks, need at least {needed})")]
    ClockResolution { ticks: u64, needed: u64 },

    #[error("execution failure: {0}")]
    ExecutionFailure(String),

    #[error("deadlock: every worker is suspended with {remaining} tasks outstanding")]
    DeadlockDetected { remaining: usize },

    #[error("wall time {0:e}s is below clock resolution")]
    ZeroWallTime(f64),

    #[error("invalid sweep: {0}")]
    InvalidSweep(&'static str),

    #[error("no samples to aggregate")]
    EmptySamples,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
