use alloc::string::String;
use core::fmt;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Input dimensions do not agree (point dim vs. lengthscale count, etc.).
    DimensionMismatch { expected: usize, got: usize },
    /// A hyperparameter or argument violates its domain.
    InvalidArgument(String),
    /// Covariance factorization failed even after jitter escalation.
    IllConditioned { jitter: f64 },
    /// A design is degenerate (too few points, all points identical, ...).
    DegenerateDesign(String),
    /// A computed variance is negative beyond numerical tolerance.
    NegativeVariance(f64),
    /// The requested configuration cannot be run (e.g. a benchmark that
    /// needs a value oracle on a simulator that has none).
    Unsupported(String),
    /// A simulator produced a non-finite output.
    SimulationFailure { scenario: usize, stage: u32 },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            CoreError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            CoreError::IllConditioned { jitter } => {
                write!(f, "covariance matrix ill-conditioned (last jitter {jitter:.3e})")
            }
            CoreError::DegenerateDesign(msg) => write!(f, "degenerate design: {msg}"),
            CoreError::NegativeVariance(v) => {
                write!(f, "negative variance {v:.3e} beyond tolerance")
            }
            CoreError::Unsupported(msg) => write!(f, "unsupported configuration: {msg}"),
            CoreError::SimulationFailure { scenario, stage } => {
                write!(f, "simulator returned non-finite output at scenario {scenario}, stage {stage}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}
