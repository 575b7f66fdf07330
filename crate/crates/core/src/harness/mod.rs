//! Config-driven experiment runner: scenario files, verification suites,
//! trace and report persistence. Works in `f64` throughout.

pub mod config;
pub mod report;
pub mod suite;
pub mod trace;

pub use config::{load_config, parse_config, ScenarioConfig};
pub use report::{ClaimResult, RunReport};
pub use suite::{graph_report, oracle_report, run, sweep_k, RunOptions, Suite, SweepRow};
pub use trace::{read_trace, write_trace, TraceColumn, TraceMeta};

use thiserror::Error;

/// Exit status for a run whose claims all held.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CLAIM_FAILURE: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
    /// The scenario does not meet a suite's preconditions.
    #[error("suite requirement not met: {0}")]
    Requirement(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("malformed trace: {0}")]
    Trace(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}
