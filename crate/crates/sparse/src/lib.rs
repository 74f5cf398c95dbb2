//! Complex sparse linear algebra for finite element systems.
//!
//! [`SparseMatrixC`] stores square complex matrices in compressed rows.
//! [`factorize`] produces a [`Factorization`] usable for repeated solves:
//! complex symmetric matrices go through a multifrontal `L D L^T` with a
//! nested dissection ordering, anything else through a general sparse LU.

mod csr;
mod factor;
mod ldlt;
mod ordering;

pub use csr::{SparseMatrixC, SparsityPattern};
pub use factor::{factorize, Factorization, Factorizer, Method, DEBUG_RESIDUAL_BOUND, SINGULAR_PIVOT_RATIO};
pub use ldlt::{NumericLdlt, SymbolicLdlt};
pub use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of bounds for dimension {n}")]
    IndexOutOfBounds { index: usize, n: usize },
    #[error("matrices do not share a sparsity pattern")]
    PatternMismatch,
    #[error("empty input")]
    Empty,
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("matrix is numerically singular ({detail})")]
    Singular { detail: String },
    #[error("matrix market parse error: {0}")]
    Parse(String),
    #[error("sparse backend failure: {0}")]
    Backend(String),
}
