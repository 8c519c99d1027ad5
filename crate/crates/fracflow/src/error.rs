use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid fracture geometry: {0}")]
    InvalidFracture(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("structurally singular matrix")]
    SingularMatrix,

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("basis constraint residual {0:.3e} exceeds 1e-8")]
    ConstraintViolation(f64),

    #[error("missing basis for coarse dof (cell {cell}, continuum {continuum})")]
    MissingBasis { cell: usize, continuum: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    FileFormat { path: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
