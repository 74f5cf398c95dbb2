use nlhelm_sparse::SparseError;

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("point ({x:.6}, {y:.6}) is not inside the mesh")]
    NotFound { x: f64, y: f64 },
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("mesh invariant violated: {0}")]
    Invariant(String),
    #[error("mesh dump parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

pub type Result<T, E = FemError> = std::result::Result<T, E>;
