//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectral input violates Hermitian symmetry (max deviation {max_dev:.3e})")]
    SymmetryViolation { max_dev: f64 },

    #[error("exponent saturation at site {site}: |{exponent:.3e}| > 700")]
    Saturation { site: usize, exponent: f64 },

    #[error("degenerate importance weights: {0}")]
    DegenerateWeights(String),

    #[error("flow step rejected at scale {scale:.6e}: |drift increment| {magnitude:.3e} exceeds clamp {clamp:.3e}")]
    StepRejection {
        scale: f64,
        magnitude: f64,
        clamp: f64,
    },

    #[error("rejection sampling infeasible: acceptance rate {acceptance:.3e} below {floor:.3e}")]
    InfeasibleRejection { acceptance: f64, floor: f64 },

    #[error("quadrature infeasible: {0}")]
    InfeasibleQuadrature(String),

    #[error("insufficient precision: {0}")]
    Precision(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: usage/config problems exit 2, every
    /// other failure exits 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
