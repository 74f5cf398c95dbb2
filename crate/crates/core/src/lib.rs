//! Finite element discretization of a Helmholtz problem with a Kerr-type
//! nonlinearity on the unit disk, and the fixed-point solvers for it.

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod lagrange;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod space;

pub use assembly::{
    assemble_linearized, assemble_load, assemble_nonlinear_residual, assemble_operators, boundary_load, LinearizedSystem,
    Operators,
};
pub use diagnostics::{energy_norm, error_vs_exact, error_vs_reference, fit_slopes, linf_on_d, EnergyNorm, ErrorPair, ErrorReport};
pub use error::{FemError, Result};
pub use field::{interpolate, FeField};
pub use mesh::{build_disk_mesh, build_disk_mesh_level, refine, Mesh};
pub use nlhelm_sparse::Complex64;
pub use problem::{BoundaryData, ProblemSpec, Scheme, Source};
pub use solver::{smallness_diagnostics, solve_nonlinear, solve_nonlinear_from, IterationTrace, Outcome, SolverError};
pub use space::{make_space, FeSpace};
