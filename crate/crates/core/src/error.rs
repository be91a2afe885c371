//! Error and validation types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, ModelError>;

/// Errors produced by model construction, evaluation, and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("conflict probability out of range at index {index}: {value} (must lie in [0, 1))")]
    InvalidConflictProbability { index: usize, value: f64 },

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    #[error("{what} must be finite and non-negative, got {value} at index {index}")]
    InvalidDuration {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("operation profile must have at least one positive duration")]
    AllZeroDurations,

    #[error("dimension {n} exceeds the reference-oracle cap of {cap}")]
    DimensionCapExceeded { n: usize, cap: usize },

    #[error("internal error: transient system is singular")]
    SingularSystem,

    #[error("response time must be positive, got {value}")]
    NonPositiveResponseTime { value: f64 },

    #[error("holding time {holding} exceeds response time {response} at index {index}")]
    HoldingExceedsResponse {
        index: usize,
        holding: f64,
        response: f64,
    },

    #[error("subset size must be at least 1")]
    ZeroSubsetSize,

    #[error("data layout must contain at least one item")]
    EmptyDataSet,

    #[error("layout must define at least one operation")]
    NoOperations,

    #[error("sample size {n} exceeds population size {d}")]
    SampleExceedsPopulation { n: usize, d: usize },

    #[error("enumeration over C({d}, {n}) = {combinations} subsets exceeds the cap of {cap}")]
    EnumerationCapExceeded {
        d: usize,
        n: usize,
        combinations: u128,
        cap: u64,
    },

    #[error("pmf shape {rows}x{cols} does not match n={n}, d={d}")]
    PmfShapeMismatch {
        rows: usize,
        cols: usize,
        n: usize,
        d: usize,
    },

    #[error("invalid workload: {}", format_violations(.0))]
    InvalidWorkload(Vec<Violation>),

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: u32 },

    #[error("target_commits must be at least 1")]
    ZeroTargetCommits,

    #[error("no progress: thread {thread} aborted {count} times at t={time_us} µs")]
    SimulationStalled {
        thread: usize,
        count: u64,
        time_us: f64,
    },

    #[error("commit log is empty")]
    EmptyCommitLog,
}

/// One workload-validation failure: a stable machine code plus a human message.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

impl Violation {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
