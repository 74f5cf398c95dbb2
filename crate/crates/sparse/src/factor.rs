//! Direct solvers: dispatch between the symmetric multifrontal path and a
//! general sparse LU, with iterative refinement on every solve.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::csr::SparseMatrixC;
use crate::ldlt::{NumericLdlt, SymbolicLdlt};
use crate::SparseError;

/// Pivots below this multiple of `max|A|` count as zero.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;
/// Relative symmetry defect under which the `L D L^T` path is taken.
const SYMMETRY_TOL: f64 = 1e-12;
const MAX_REFINEMENT_STEPS: usize = 3;
/// Residual bound checked after every solve when debug assertions are on.
pub const DEBUG_RESIDUAL_BOUND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Multifrontal complex symmetric `L D L^T` with nested dissection.
    Ldlt,
    /// General sparse LU with partial pivoting.
    Lu,
}

enum Factors {
    Ldlt(NumericLdlt),
    Lu(Box<Lu<usize, Complex64>>),
}

/// A factorized matrix, reusable for any number of right-hand sides.
pub struct Factorization {
    factors: Factors,
    matrix: SparseMatrixC,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("method", &self.method())
            .field("dim", &self.dim())
            .finish()
    }
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn lu_factorize(a: &SparseMatrixC) -> Result<Lu<usize, Complex64>, SparseError> {
    let n = a.dim();
    let triplets: Vec<_> = (0..n)
        .flat_map(|i| a.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
        .collect();
    let csc = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| SparseError::Backend(format!("{e:?}")))?;
    let symbolic =
        SymbolicLu::try_new(csc.symbolic()).map_err(|e| SparseError::Backend(format!("{e:?}")))?;
    Lu::try_new_with_symbolic(symbolic, csc.as_ref()).map_err(|e| SparseError::Backend(format!("{e:?}")))
}

impl Factorization {
    /// LU gives no pivot diagnostics, so singularity is detected by a probe
    /// solve with a known solution.
    fn new_checked(factors: Factors, matrix: &SparseMatrixC) -> Result<Self, SparseError> {
        let f = Self {
            factors,
            matrix: matrix.clone(),
        };
        let n = matrix.dim();
        let ones = vec![Complex64::new(1.0, 0.0); n];
        let b = matrix.matvec(&ones)?;
        let mut x = b.clone();
        f.apply_inverse(&mut x);
        let r = f.residual(&x, &b);
        let bn = norm2(&b);
        if x.iter().any(|v| !v.is_finite()) || !(r <= 1e-8 * bn.max(f64::MIN_POSITIVE)) {
            return Err(SparseError::Singular {
                detail: format!("probe solve residual {r:.3e} relative to {bn:.3e}"),
            });
        }
        Ok(f)
    }

    pub fn method(&self) -> Method {
        match self.factors {
            Factors::Ldlt(_) => Method::Ldlt,
            Factors::Lu(_) => Method::Lu,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// The factored matrix.
    pub fn matrix(&self) -> &SparseMatrixC {
        &self.matrix
    }

    /// Symmetric factors when [`Method::Ldlt`] was used.
    pub fn ldlt(&self) -> Option<&NumericLdlt> {
        match &self.factors {
            Factors::Ldlt(l) => Some(l),
            Factors::Lu(_) => None,
        }
    }

    fn apply_inverse(&self, x: &mut [Complex64]) {
        match &self.factors {
            Factors::Ldlt(l) => l.solve_in_place(x),
            Factors::Lu(lu) => {
                let b = faer::Mat::from_fn(x.len(), 1, |i, _| x[i]);
                let sol = lu.solve(&b);
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = sol[(i, 0)];
                }
            }
        }
    }

    fn residual(&self, x: &[Complex64], b: &[Complex64]) -> f64 {
        let ax = self.matrix.matvec(x).expect("dimensions checked");
        ax.iter()
            .zip(b)
            .map(|(a, b)| (b - a).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, SparseError> {
        self.solve_with_residual(rhs).map(|(x, _)| x)
    }

    /// Solves `A x = rhs` and reports `||A x - rhs|| / ||rhs||`.
    pub fn solve_with_residual(&self, rhs: &[Complex64]) -> Result<(Vec<Complex64>, f64), SparseError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        let bn = norm2(rhs);
        if bn == 0.0 {
            return Ok((vec![Complex64::new(0.0, 0.0); n], 0.0));
        }
        let mut x = rhs.to_vec();
        self.apply_inverse(&mut x);
        let mut r = vec![Complex64::new(0.0, 0.0); n];
        let mut rn = f64::INFINITY;
        for _ in 0..=MAX_REFINEMENT_STEPS {
            self.matrix.matvec_into(&x, &mut r)?;
            for (ri, bi) in r.iter_mut().zip(rhs) {
                *ri = bi - *ri;
            }
            let new_rn = norm2(&r);
            if !new_rn.is_finite() {
                return Err(SparseError::NonFinite);
            }
            if new_rn >= 0.5 * rn || new_rn <= 1e-15 * bn {
                rn = rn.min(new_rn);
                break;
            }
            rn = new_rn;
            self.apply_inverse(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        let rel = rn / bn;
        debug_assert!(
            rel <= DEBUG_RESIDUAL_BOUND,
            "direct solve residual {rel:.3e} exceeds {DEBUG_RESIDUAL_BOUND:.0e}"
        );
        Ok((x, rel))
    }
}

/// Factorizes `m`, choosing the method from its symmetry.
pub fn factorize(m: &SparseMatrixC) -> Result<Factorization, SparseError> {
    Factorizer::new().factorize(m)
}

/// Factorizes repeatedly, reusing the symbolic analysis while the sparsity
/// pattern stays the same.
#[derive(Default)]
pub struct Factorizer {
    symbolic: Option<Arc<SymbolicLdlt>>,
}

impl Factorizer {
    pub fn new() -> Self {
        Self::default()
    }

    fn symbolic_for(&mut self, m: &SparseMatrixC) -> Arc<SymbolicLdlt> {
        match &self.symbolic {
            Some(s) if Arc::ptr_eq(s.pattern(), m.pattern()) || **s.pattern() == **m.pattern() => {
                s.clone()
            }
            _ => {
                let s = Arc::new(SymbolicLdlt::analyze(m.pattern().clone()));
                self.symbolic = Some(s.clone());
                s
            }
        }
    }

    pub fn factorize(&mut self, m: &SparseMatrixC) -> Result<Factorization, SparseError> {
        if m.values().iter().any(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite);
        }
        let scale = m.max_abs();
        if m.dim() == 0 {
            return Err(SparseError::Empty);
        }
        if scale == 0.0 {
            return Err(SparseError::Singular {
                detail: "zero matrix".into(),
            });
        }
        let mut tiny = None;
        if m.is_complex_symmetric(SYMMETRY_TOL) {
            let symbolic = self.symbolic_for(m);
            match NumericLdlt::factorize(symbolic, m, SINGULAR_PIVOT_RATIO * scale) {
                Ok(l) => {
                    return Ok(Factorization {
                        factors: Factors::Ldlt(l),
                        matrix: m.clone(),
                    })
                }
                Err(t) => tiny = Some(t),
            }
        }
        // Symmetric diagonal pivoting failed or the matrix is unsymmetric.
        let lu = lu_factorize(m)?;
        Factorization::new_checked(Factors::Lu(Box::new(lu)), m).map_err(|e| match (e, tiny) {
            (SparseError::Singular { detail }, Some(t)) => SparseError::Singular {
                detail: format!(
                    "{detail}; symmetric pivot {:.3e} at elimination position {}",
                    t.magnitude, t.position
                ),
            },
            (e, _) => e,
        })
    }
}
