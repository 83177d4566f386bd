use thiserror::Error;

/// Errors produced by the simulator, its analyses and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: [usize; 3],
        actual: [usize; 3],
    },

    #[error("invalid nonlinearity: {0}")]
    Nonlinearity(String),

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("Poincaré: λ₁+β ≤ 0 (λ₁+β = {lambda1_plus_beta})")]
    Poincare { lambda1_plus_beta: f64 },

    #[error("invalid damping: {0}")]
    Damping(String),

    #[error("invalid stepper configuration: {0}")]
    Stepper(String),

    #[error("not enough samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("samples are not uniformly spaced in time")]
    NonUniformSamples,

    #[error("check not applicable: {0}")]
    Inapplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed field file: {0}")]
    FieldFormat(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
