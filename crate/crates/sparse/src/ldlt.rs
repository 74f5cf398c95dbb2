//! Multifrontal `L D L^T` factorization of complex symmetric matrices.
//!
//! The factorization is unconjugated: `P A P^T = L D L^T` with `L` unit
//! lower triangular and `D` diagonal. Each node of the nested dissection
//! tree is a dense front made of the node's own (fully summed) variables
//! followed by the ancestor variables it couples to. Inside a front the
//! fully summed block is factored with 1x1 diagonal pivoting, so the
//! permutation is refined locally during the numeric phase.

use std::sync::Arc;

use faer::linalg::matmul::triangular::{matmul as tri_matmul, BlockStructure};
use faer::{Accum, MatMut, MatRef, Par};
use num_complex::Complex64;

use crate::csr::{SparseMatrixC, SparsityPattern};
use crate::ordering::{nested_dissection, AssemblyTree, Graph};

const PANEL: usize = 48;

#[derive(Debug)]
struct Front {
    start: usize,
    end: usize,
    /// Elimination positions of coupled ancestor variables, ascending.
    boundary: Vec<usize>,
    /// Local front index of each of this node's boundary entries inside
    /// the parent front.
    to_parent: Vec<usize>,
    children: Vec<usize>,
}

impl Front {
    fn pivots(&self) -> usize {
        self.end - self.start
    }

    fn size(&self) -> usize {
        self.pivots() + self.boundary.len()
    }
}

/// Ordering and front structure for one sparsity pattern; reusable across
/// numeric factorizations of matrices sharing that pattern.
#[derive(Debug)]
pub struct SymbolicLdlt {
    pattern: Arc<SparsityPattern>,
    perm: Vec<usize>,
    inv: Vec<usize>,
    fronts: Vec<Front>,
}

impl SymbolicLdlt {
    pub fn analyze(pattern: Arc<SparsityPattern>) -> Self {
        let graph = Graph::from_pattern(&pattern);
        let AssemblyTree { perm, inv, nodes } = nested_dissection(&graph);
        let n = pattern.dim();
        let mut marker = vec![usize::MAX; n];
        let mut fronts: Vec<Front> = Vec::with_capacity(nodes.len());
        for (id, node) in nodes.iter().enumerate() {
            let mut boundary = Vec::new();
            for &c in &node.children {
                for &pos in &fronts[c].boundary {
                    if pos >= node.end && marker[pos] != id {
                        marker[pos] = id;
                        boundary.push(pos);
                    }
                }
            }
            for pos in node.start..node.end {
                for &w in graph.neighbors(perm[pos]) {
                    let pw = inv[w];
                    if pw >= node.end && marker[pw] != id {
                        marker[pw] = id;
                        boundary.push(pw);
                    }
                }
            }
            boundary.sort_unstable();
            fronts.push(Front {
                start: node.start,
                end: node.end,
                boundary,
                to_parent: Vec::new(),
                children: node.children.clone(),
            });
        }
        for (id, node) in nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                let (start, end, s) = (fronts[p].start, fronts[p].end, fronts[p].pivots());
                let map = fronts[id]
                    .boundary
                    .iter()
                    .map(|&pos| {
                        if pos < end {
                            debug_assert!(pos >= start);
                            pos - start
                        } else {
                            s + fronts[p]
                                .boundary
                                .binary_search(&pos)
                                .expect("child boundary must be covered by parent front")
                        }
                    })
                    .collect();
                fronts[id].to_parent = map;
            } else {
                debug_assert!(fronts[id].boundary.is_empty());
            }
        }
        Self {
            pattern,
            perm,
            inv,
            fronts,
        }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Number of stored entries of `L` (strict lower part) plus `D`.
    pub fn factor_nnz(&self) -> usize {
        self.fronts
            .iter()
            .map(|f| {
                let s = f.pivots();
                s * (s + 1) / 2 + s * f.boundary.len()
            })
            .sum()
    }

    pub fn n_fronts(&self) -> usize {
        self.fronts.len()
    }

    pub fn max_front(&self) -> usize {
        self.fronts.iter().map(Front::size).max().unwrap_or(0)
    }
}

#[derive(Debug)]
struct NodeFactor {
    /// Elimination position of each factor column after local pivoting.
    order: Vec<usize>,
    /// Column-major `m x s` panel: unit lower `L11` on top, `L21` below.
    panel: Vec<Complex64>,
    d: Vec<Complex64>,
}

/// Numeric `L D L^T` factors.
#[derive(Debug)]
pub struct NumericLdlt {
    symbolic: Arc<SymbolicLdlt>,
    nodes: Vec<NodeFactor>,
}

/// A pivot smaller than the floor was met at this elimination position.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TinyPivot {
    pub position: usize,
    pub magnitude: f64,
}

fn swap_symmetric(f: &mut [Complex64], m: usize, j: usize, p: usize) {
    debug_assert!(j < p);
    for t in 0..j {
        f.swap(t * m + j, t * m + p);
    }
    f.swap(j * m + j, p * m + p);
    for i in j + 1..p {
        f.swap(j * m + i, i * m + p);
    }
    for i in p + 1..m {
        f.swap(j * m + i, p * m + i);
    }
}

/// Factors the leading `s` columns of the lower-stored symmetric front `f`
/// (`m x m`, column-major). On return the leading `m x s` block holds the
/// unit lower factor, the trailing block the Schur complement, and `local`
/// the pivot order.
fn partial_ldlt(
    f: &mut [Complex64],
    m: usize,
    s: usize,
    floor: f64,
    local: &mut [usize],
    d: &mut [Complex64],
) -> Result<(), (usize, f64)> {
    let zero = Complex64::new(0.0, 0.0);
    let mut col = vec![zero; m];
    let mut dcur = vec![zero; s];
    let mut k0 = 0;
    while k0 < s {
        let k1 = (k0 + PANEL).min(s);
        for i in k0..s {
            dcur[i] = f[i * m + i];
        }
        for j in k0..k1 {
            let mut p = j;
            let mut best = dcur[j].norm();
            for (i, v) in dcur.iter().enumerate().take(s).skip(j + 1) {
                let a = v.norm();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            if p != j {
                swap_symmetric(f, m, j, p);
                dcur.swap(j, p);
                local.swap(j, p);
            }
            col[j..m].copy_from_slice(&f[j * m + j..j * m + m]);
            for t in k0..j {
                let coef = d[t] * f[t * m + j];
                if coef != zero {
                    let lt = &f[t * m + j..t * m + m];
                    for (c, l) in col[j..m].iter_mut().zip(lt) {
                        *c -= coef * l;
                    }
                }
            }
            let dj = col[j];
            if !(dj.norm() > floor) {
                return Err((j, dj.norm()));
            }
            d[j] = dj;
            let inv = dj.inv();
            f[j * m + j] = Complex64::new(1.0, 0.0);
            for i in j + 1..m {
                let l = col[i] * inv;
                f[j * m + i] = l;
                if i < s {
                    dcur[i] -= l * l * dj;
                }
            }
        }
        if k1 < m {
            let w = k1 - k0;
            let rows = m - k1;
            let (left, right) = f.split_at_mut(k1 * m);
            let lp = MatRef::from_column_major_slice_with_stride(&left[k0 * m + k1..], rows, w, m);
            let scaled = faer::Mat::from_fn(rows, w, |i, t| lp[(i, t)] * d[k0 + t]);
            let trailing = MatMut::from_column_major_slice_with_stride_mut(&mut right[k1..], rows, rows, m);
            tri_matmul(
                trailing,
                BlockStructure::TriangularLower,
                Accum::Add,
                scaled.as_ref(),
                BlockStructure::Rectangular,
                lp.transpose(),
                BlockStructure::Rectangular,
                Complex64::new(-1.0, 0.0),
                Par::Seq,
            );
        }
        k0 = k1;
    }
    Ok(())
}

impl NumericLdlt {
    pub(crate) fn factorize(
        symbolic: Arc<SymbolicLdlt>,
        a: &SparseMatrixC,
        floor: f64,
    ) -> Result<Self, TinyPivot> {
        let sym = &*symbolic;
        let n = sym.perm.len();
        let mut local_of = vec![usize::MAX; n];
        let mut stack: Vec<Vec<Complex64>> = Vec::new();
        let mut nodes = Vec::with_capacity(sym.fronts.len());
        let zero = Complex64::new(0.0, 0.0);
        for front in &sym.fronts {
            let s = front.pivots();
            let m = front.size();
            for (i, &pos) in front.boundary.iter().enumerate() {
                local_of[pos] = s + i;
            }
            let mut f = vec![zero; m * m];
            for pos in front.start..front.end {
                let lv = pos - front.start;
                for (w, val) in a.row(sym.perm[pos]) {
                    let pw = sym.inv[w];
                    if pw < front.start {
                        continue;
                    }
                    if pw < front.end {
                        let lw = pw - front.start;
                        if lv >= lw {
                            f[lw * m + lv] += val;
                        }
                    } else {
                        f[lv * m + local_of[pw]] += val;
                    }
                }
            }
            // Children's updates sit on top of the stack in child order.
            let base = stack.len() - front.children.len();
            for (k, &c) in front.children.iter().enumerate() {
                let update = &stack[base + k];
                let map = &sym.fronts[c].to_parent;
                let b = map.len();
                for j in 0..b {
                    let pj = map[j];
                    let ucol = &update[j * b..(j + 1) * b];
                    let fcol = &mut f[pj * m..(pj + 1) * m];
                    for i in j..b {
                        fcol[map[i]] += ucol[i];
                    }
                }
            }
            stack.truncate(base);
            let mut local: Vec<usize> = (0..s).collect();
            let mut d = vec![zero; s];
            if let Err((j, mag)) = partial_ldlt(&mut f, m, s, floor, &mut local, &mut d) {
                return Err(TinyPivot {
                    position: front.start + local[j],
                    magnitude: mag,
                });
            }
            let b = m - s;
            if b > 0 {
                let mut update = vec![zero; b * b];
                for j in 0..b {
                    update[j * b + j..(j + 1) * b]
                        .copy_from_slice(&f[(s + j) * m + s + j..(s + j + 1) * m]);
                }
                stack.push(update);
            }
            for pos in &front.boundary {
                local_of[*pos] = usize::MAX;
            }
            f.truncate(m * s);
            f.shrink_to_fit();
            nodes.push(NodeFactor {
                order: local.iter().map(|&l| front.start + l).collect(),
                panel: f,
                d,
            });
        }
        debug_assert!(stack.is_empty());
        Ok(Self { symbolic, nodes })
    }

    pub fn dim(&self) -> usize {
        self.symbolic.perm.len()
    }

    pub fn symbolic(&self) -> &Arc<SymbolicLdlt> {
        &self.symbolic
    }

    /// Smallest pivot magnitude in `D`.
    pub fn min_pivot(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|n| n.d.iter())
            .fold(f64::INFINITY, |m, d| m.min(d.norm()))
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let sym = &*self.symbolic;
        debug_assert_eq!(x.len(), self.dim());
        let mut y: Vec<Complex64> = sym.perm.iter().map(|&v| x[v]).collect();
        let mut w = Vec::new();
        // Forward: L D y = P b, front by front on a gathered local vector.
        for (front, node) in sym.fronts.iter().zip(&self.nodes) {
            let s = front.pivots();
            let m = front.size();
            w.clear();
            w.extend(node.order.iter().chain(&front.boundary).map(|&pos| y[pos]));
            for j in 0..s {
                let wj = w[j];
                let col = &node.panel[j * m + j + 1..(j + 1) * m];
                for (wi, l) in w[j + 1..].iter_mut().zip(col) {
                    *wi -= l * wj;
                }
            }
            for (j, &pos) in node.order.iter().enumerate() {
                y[pos] = w[j] / node.d[j];
            }
            for (bi, &pos) in front.boundary.iter().enumerate() {
                y[pos] = w[s + bi];
            }
        }
        // Backward: L^T x = y.
        for (front, node) in sym.fronts.iter().zip(&self.nodes).rev() {
            let s = front.pivots();
            let m = front.size();
            w.clear();
            w.extend(node.order.iter().chain(&front.boundary).map(|&pos| y[pos]));
            for j in (0..s).rev() {
                let col = &node.panel[j * m + j + 1..(j + 1) * m];
                let dot: Complex64 = w[j + 1..].iter().zip(col).map(|(a, l)| a * l).sum();
                w[j] -= dot;
            }
            for (j, &pos) in node.order.iter().enumerate() {
                y[pos] = w[j];
            }
        }
        for (pos, &v) in sym.perm.iter().enumerate() {
            x[v] = y[pos];
        }
    }

    /// Dense `(P, L, D)` with `P A P^T = L D L^T`, where `P[k]` is the
    /// original index eliminated k-th. Meant for small checks.
    pub fn dense_factors(&self) -> (Vec<usize>, Vec<Vec<Complex64>>, Vec<Complex64>) {
        let sym = &*self.symbolic;
        let n = self.dim();
        let zero = Complex64::new(0.0, 0.0);
        // Final elimination order: positions after local pivoting.
        let mut rank_of_pos = vec![0usize; n];
        let mut order = Vec::with_capacity(n);
        for node in &self.nodes {
            for &pos in &node.order {
                rank_of_pos[pos] = order.len();
                order.push(pos);
            }
        }
        let mut l = vec![vec![zero; n]; n];
        let mut d = vec![zero; n];
        for (front, node) in sym.fronts.iter().zip(&self.nodes) {
            let s = front.pivots();
            let m = front.size();
            for j in 0..s {
                let cj = rank_of_pos[node.order[j]];
                d[cj] = node.d[j];
                l[cj][cj] = Complex64::new(1.0, 0.0);
                for i in j + 1..s {
                    l[rank_of_pos[node.order[i]]][cj] = node.panel[j * m + i];
                }
                for (bi, &pos) in front.boundary.iter().enumerate() {
                    l[rank_of_pos[pos]][cj] = node.panel[j * m + s + bi];
                }
            }
        }
        let p = order.iter().map(|&pos| sym.perm[pos]).collect();
        (p, l, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_matches_explicit_permutation() {
        let m = 6;
        let mut full = vec![vec![Complex64::new(0.0, 0.0); m]; m];
        for i in 0..m {
            for j in 0..=i {
                let v = Complex64::new((i * 10 + j) as f64, j as f64);
                full[i][j] = v;
                full[j][i] = v;
            }
        }
        let mut f = vec![Complex64::new(0.0, 0.0); m * m];
        for j in 0..m {
            for i in j..m {
                f[j * m + i] = full[i][j];
            }
        }
        swap_symmetric(&mut f, m, 1, 4);
        let perm = [0, 4, 2, 3, 1, 5];
        for j in 0..m {
            for i in j..m {
                assert_eq!(f[j * m + i], full[perm[i]][perm[j]], "({i},{j})");
            }
        }
    }
}
