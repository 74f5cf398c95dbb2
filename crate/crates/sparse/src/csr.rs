//! Compressed sparse row storage for complex matrices.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::SparseError;

/// Row pointers and sorted column indices of a square sparse matrix.
///
/// Patterns are shared behind an [`Arc`] so that the many matrices
/// assembled over one finite element space can be recognised as having
/// identical structure without comparing index arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from per-row column lists. Columns are sorted and
    /// deduplicated.
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self, SparseError> {
        if rows.len() != n {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: rows.len(),
            });
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last >= n {
                    return Err(SparseError::IndexOutOfBounds { index: last, n });
                }
            }
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Column indices of row `i`.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage offset of entry `(i, j)`, if it is part of the pattern.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }

    /// True when `(i, j)` in the pattern implies `(j, i)` in the pattern.
    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).iter().all(|&j| self.find(j, i).is_some()))
    }
}

/// Square complex sparse matrix in compressed row layout.
#[derive(Debug, Clone)]
pub struct SparseMatrixC {
    pattern: Arc<SparsityPattern>,
    values: Vec<Complex64>,
}

impl SparseMatrixC {
    /// Matrix with the given pattern and all stored values zero.
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); pattern.nnz()];
        Self { pattern, values }
    }

    pub fn from_parts(
        pattern: Arc<SparsityPattern>,
        values: Vec<Complex64>,
    ) -> Result<Self, SparseError> {
        if values.len() != pattern.nnz() {
            return Err(SparseError::DimensionMismatch {
                expected: pattern.nnz(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite);
        }
        Ok(Self { pattern, values })
    }

    /// Builds an `n x n` matrix from `(row, col, value)` triplets; duplicate
    /// positions are summed.
    pub fn from_triplets(
        n: usize,
        triplets: &[(usize, usize, Complex64)],
    ) -> Result<Self, SparseError> {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SparseError::IndexOutOfBounds { index: i.max(j), n });
            }
            if !v.is_finite() {
                return Err(SparseError::NonFinite);
            }
            rows[i].push(j);
        }
        let pattern = Arc::new(SparsityPattern::from_rows(n, rows)?);
        let mut m = Self::zeros(pattern);
        for &(i, j, v) in triplets {
            m.add_to(i, j, v);
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            pattern: Arc::new(SparsityPattern::identity(n)),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Dense row-major array converted to sparse, keeping nonzeros only.
    pub fn from_dense(rows: &[Vec<Complex64>]) -> Result<Self, SparseError> {
        let n = rows.len();
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SparseError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != Complex64::new(0.0, 0.0) {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &triplets)
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Entry `(i, j)`; zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.pattern
            .find(i, j)
            .map_or(Complex64::new(0.0, 0.0), |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`.
    ///
    /// # Panics
    /// If `(i, j)` is not part of the pattern.
    pub fn add_to(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[k] += v;
    }

    /// Iterates `(column, value)` over row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        self.pattern.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, SparseError> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<(), SparseError> {
        let n = self.dim();
        if x.len() != n {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        if y.len() != n {
            return Err(SparseError::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in rp[i]..rp[i + 1] {
                acc += self.values[k] * x[ci[k]];
            }
            *yi = acc;
        }
        Ok(())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |M_ij - M_ji|` over the pattern (no conjugation).
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for (j, v) in self.row(i) {
                if j > i {
                    worst = worst.max((v - self.get(j, i)).norm());
                }
            }
        }
        // Entries whose transpose is outside the pattern.
        for i in 0..self.dim() {
            for (j, v) in self.row(i) {
                if j < i && self.pattern.find(j, i).is_none() {
                    worst = worst.max(v.norm());
                }
            }
        }
        worst
    }

    /// `M = M^T` up to `rel_tol * max|M|`.
    pub fn is_complex_symmetric(&self, rel_tol: f64) -> bool {
        self.symmetry_defect() <= rel_tol * self.max_abs()
    }

    /// Linear combination `sum_i c_i M_i` of matrices sharing one pattern.
    pub fn linear_combination(terms: &[(Complex64, &SparseMatrixC)]) -> Result<Self, SparseError> {
        let first = terms.first().ok_or(SparseError::Empty)?.1;
        let mut out = Self::zeros(first.pattern.clone());
        for &(c, m) in terms {
            if !Arc::ptr_eq(&m.pattern, &first.pattern) && *m.pattern != *first.pattern {
                return Err(SparseError::PatternMismatch);
            }
            for (o, v) in out.values.iter_mut().zip(&m.values) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Dense row-major copy. Meant for small verification problems.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        let mut d = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Writes the matrix in Matrix Market coordinate format
    /// (`complex general`, one-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.dim(), self.dim(), self.nnz())?;
        for i in 0..self.dim() {
            for (j, v) in self.row(i) {
                writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// Parses the output of [`write_matrix_market`](Self::write_matrix_market).
    pub fn read_matrix_market(text: &str) -> Result<Self, SparseError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('%'));
        let header = lines.next().ok_or(SparseError::Parse("missing size line".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| SparseError::Parse(format!("bad size line `{header}`"))))
            .collect::<Result<_, _>>()?;
        if dims.len() != 3 || dims[0] != dims[1] {
            return Err(SparseError::Parse(format!("expected square size line, got `{header}`")));
        }
        let mut triplets = Vec::with_capacity(dims[2]);
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 4 {
                return Err(SparseError::Parse(format!("bad entry line `{line}`")));
            }
            let bad = || SparseError::Parse(format!("bad entry line `{line}`"));
            let i: usize = t[0].parse().map_err(|_| bad())?;
            let j: usize = t[1].parse().map_err(|_| bad())?;
            let re: f64 = t[2].parse().map_err(|_| bad())?;
            let im: f64 = t[3].parse().map_err(|_| bad())?;
            if i == 0 || j == 0 {
                return Err(bad());
            }
            triplets.push((i - 1, j - 1, Complex64::new(re, im)));
        }
        Self::from_triplets(dims[0], &triplets)
    }
}
