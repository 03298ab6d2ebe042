use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is not one (got {0})")]
    TraceNotOne(f64),

    #[error("vector is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("states are linearly dependent (Gram determinant {0:e})")]
    LinearlyDependent(f64),

    #[error("degenerate decomposition: {0}")]
    DecompositionDegenerate(String),

    #[error("ancilla dimension {ancilla} is smaller than the rank {rank}")]
    AncillaTooSmall { ancilla: usize, rank: usize },

    #[error("invalid partial isometry: {0}")]
    InvalidIsometry(String),

    #[error("Gram matrices differ by {0:e}")]
    GramMismatch(f64),

    #[error("channel is not trace preserving (residual {0:e})")]
    NotTracePreserving(f64),

    #[error("inconsistent linear system (residual {0:e})")]
    Inconsistent(f64),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
