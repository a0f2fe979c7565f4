use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("rate profile has no segments")]
    EmptyProfile,
    #[error("invalid segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    Validation { line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("unknown vm {0}")]
    UnknownVm(u32),
    #[error("vm {0} is already released")]
    AlreadyReleased(u32),
    #[error("trace arrival at {arrival}s is beyond the horizon {horizon}s")]
    TraceBeyondHorizon { arrival: f64, horizon: f64 },
    #[error("policy error: {0}")]
    Policy(#[from] PolicyError),
    #[error("counterfactual replay needs at least one candidate action")]
    NoCandidates,
    #[error("debt-aware policies need debt recording enabled")]
    DebtRequired,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("reward observed with no pending decision")]
    NoPendingDecision,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("q-table line {line}: {reason}")]
    QTableFormat { line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Workload {
        path: PathBuf,
        #[source]
        source: WorkloadError,
    },
    #[error(transparent)]
    Generate(#[from] WorkloadError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("cannot compare runs with different horizons ({0}s vs {1}s)")]
    HorizonMismatch(f64, f64),
    #[error("{path}: malformed summary: {reason}")]
    Summary { path: PathBuf, reason: String },
}

impl ExperimentError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.into(),
            source,
        }
    }
}
