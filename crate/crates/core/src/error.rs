use thiserror::Error;

/// Errors raised while constructing or evaluating the measurement model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("step size kappa must lie strictly inside (0, 1), got {0}")]
    InvalidKappa(f64),
    #[error("number of steps must be positive")]
    ZeroSteps,
    #[error("expected {expected} per-step phases, got {actual}")]
    PhaseCount { expected: usize, actual: usize },
    #[error("qubit amplitudes are not normalized: |psi+|^2 + |psi-|^2 = {0}")]
    NotNormalized(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("configuration entry {index} is {value}, expected -1 or +1")]
    InvalidStep { index: usize, value: i8 },
    #[error("configuration has {actual} steps but the model has {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("variance parameter xi must be positive and finite, got {0}")]
    InvalidXi(f64),
    #[error("dead zone must lie in [0, 1), got {0}")]
    InvalidDeadZone(f64),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("histogram needs at least one bin and strictly increasing edges")]
    InvalidHistogram,
    #[error("histograms with different edges cannot be merged")]
    HistogramMismatch,
    #[error("exhaustive enumeration is capped at {max} steps (got {requested}); use the Monte Carlo sampler instead")]
    Capacity { requested: usize, max: usize },
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
