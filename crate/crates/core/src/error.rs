use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum IgsError {
    /// Invalid ion configuration (odd N, too few ions, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A marked-state bitstring with the wrong excitation count or length.
    #[error("invalid marked state: {0}")]
    InvalidMarkedState(String),

    /// The integrator could not reach the requested tolerance.
    #[error("integration failed: {reason} (achieved step tolerance {achieved:.3e})")]
    Integration { reason: String, achieved: f64 },

    /// A degenerate subspace could not be resolved numerically.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// The tuner found no candidate below the objective threshold.
    #[error("tuning failed: {0}")]
    TuningFailed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IgsError>;
