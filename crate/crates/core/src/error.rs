use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("coin is not unitary (max residual {residual:.3e})")]
    NonUnitaryCoin { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("{what} requires 0 < p < 1, got p = {p}")]
    DegenerateProbability { what: &'static str, p: f64 },

    #[error("guard exceeded: {guard} (dimension {dim} > {limit})")]
    Guard { guard: &'static str, dim: usize, limit: usize },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("attractor space not certified: {0}")]
    Certification(String),

    #[error("wrong coin: {0}")]
    WrongCoin(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
