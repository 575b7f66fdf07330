use thiserror::Error;

/// Errors raised by the simulation and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid switching signal: {0}")]
    InvalidSignal(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("time interval [{t1}, {t2}) outside horizon [{start}, {end})")]
    OutOfRange {
        t1: f64,
        t2: f64,
        start: f64,
        end: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported representation: {0}")]
    Unsupported(String),

    #[error("singular system: rank {rank} of {size} (rank defect {})", size - rank)]
    Singular { rank: usize, size: usize },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("numerical divergence at t = {t}")]
    Divergence { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
