//! Continuous Lagrange spaces of degree `p` on a disk mesh.
//!
//! Global numbering: vertex dofs first (dof = vertex index), then edge
//! dofs in edge order, each edge walked from its lower to its higher
//! global vertex, then element-interior dofs in element order.

use std::sync::{Arc, OnceLock};

use nlhelm_sparse::SparsityPattern;

use crate::error::{FemError, Result};
use crate::lagrange::{LagrangeBasis, EDGE_VERTICES, MAX_DEGREE, REF_VERTICES};
use crate::mesh::{det, jacobian_from_nodes, Mesh, Point};
use crate::quadrature::{edge_quadrature, triangle_quadrature, LineRule, TriangleRule};

/// Volume quadrature order for degree `p`.
pub fn volume_order(p: usize) -> usize {
    3 * p + 2
}

/// Boundary quadrature order for degree `p`. Boundary work is small, so
/// the highest supported order is used; oscillatory data such as plane-wave
/// traces then integrate to near machine precision on coarse edges.
pub fn edge_order(p: usize) -> usize {
    debug_assert!(2 * p + 2 <= crate::quadrature::MAX_ORDER);
    crate::quadrature::MAX_ORDER
}

pub struct FeSpace {
    mesh: Arc<Mesh>,
    basis: LagrangeBasis,
    dofs: Vec<usize>,
    n_dofs: usize,
    pattern: Arc<SparsityPattern>,
    boundary_faces: Vec<(usize, usize)>,
    vol_rule: TriangleRule,
    edge_rule: LineRule,
    /// Basis values and reference gradients at volume points, `[q * nloc + i]`.
    vol_vals: Vec<f64>,
    vol_grads: Vec<[f64; 2]>,
    /// Geometry basis reference gradients at volume points, `[q * ngeo + i]`.
    geo_vol_grads: Vec<[f64; 2]>,
    geo_vol_vals: Vec<f64>,
    /// Per local edge: reference points, basis values, geometry tables.
    face_tables: [FaceTable; 3],
    slots: OnceLock<Vec<u32>>,
}

struct FaceTable {
    points: Vec<Point>,
    vals: Vec<f64>,
    geo_vals: Vec<f64>,
    geo_grads: Vec<[f64; 2]>,
    /// Reference tangent along the edge walk.
    tangent: Point,
}

impl std::fmt::Debug for FeSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeSpace")
            .field("degree", &self.degree())
            .field("n_dofs", &self.n_dofs)
            .field("mesh", &self.mesh)
            .finish()
    }
}

/// Quadrature data of one element, reused across elements.
#[derive(Debug, Default, Clone)]
pub struct ElementValues {
    pub points: Vec<Point>,
    /// Quadrature weight times Jacobian determinant.
    pub jxw: Vec<f64>,
    /// Physical gradients, `[q * nloc + i]`.
    pub grads: Vec<[f64; 2]>,
}

/// Quadrature data of one boundary face.
#[derive(Debug, Default, Clone)]
pub struct FaceValues {
    pub points: Vec<Point>,
    /// Quadrature weight times arc-length element.
    pub jxw: Vec<f64>,
    pub normals: Vec<Point>,
    /// Basis values, `[q * nloc + i]`.
    pub vals: Vec<f64>,
}

fn tables(basis: &LagrangeBasis, pts: &[Point]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let n = basis.len();
    let mut vals = vec![0.0; pts.len() * n];
    let mut grads = vec![[0.0; 2]; pts.len() * n];
    for (q, p) in pts.iter().enumerate() {
        basis.eval(*p, &mut vals[q * n..(q + 1) * n]);
        basis.eval_grad(*p, &mut grads[q * n..(q + 1) * n]);
    }
    (vals, grads)
}

fn inv_transpose(j: &[[f64; 2]; 2]) -> ([[f64; 2]; 2], f64) {
    let d = det(j);
    // (J^{-1})^T = 1/d [[j11, -j10], [-j01, j00]]
    ([[j[1][1] / d, -j[1][0] / d], [-j[0][1] / d, j[0][0] / d]], d)
}

fn apply(m: &[[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
}

/// Degree-`p` Lagrange space on `mesh`.
pub fn make_space(mesh: Arc<Mesh>, p: usize) -> Result<Arc<FeSpace>> {
    if !(1..=MAX_DEGREE).contains(&p) {
        return Err(FemError::Argument(format!("polynomial degree must be in 1..={MAX_DEGREE}, got {p}")));
    }
    let basis = LagrangeBasis::new(p);
    let nloc = basis.len();
    let nv = mesh.n_vertices();
    let ne = mesh.n_edges();
    let nt = mesh.n_triangles();
    let per_edge = basis.edge_interior();
    let per_cell = basis.cell_interior();
    let n_dofs = nv + ne * per_edge + nt * per_cell;

    let mut dofs = Vec::with_capacity(nt * nloc);
    for t in 0..nt {
        let tri = mesh.triangle(t);
        dofs.extend_from_slice(&tri);
        let edges = mesh.triangle_edges(t);
        for (le, [a, b]) in EDGE_VERTICES.iter().enumerate() {
            let forward = tri[*a] < tri[*b];
            let base = nv + edges[le] * per_edge;
            for k in 0..per_edge {
                dofs.push(base + if forward { k } else { per_edge - 1 - k });
            }
        }
        let base = nv + ne * per_edge + t * per_cell;
        dofs.extend(base..base + per_cell);
    }

    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_dofs];
    for el in dofs.chunks(nloc) {
        for &i in el {
            rows[i].extend_from_slice(el);
        }
    }
    for r in rows.iter_mut() {
        r.sort_unstable();
        r.dedup();
        r.shrink_to_fit();
    }
    let pattern = Arc::new(SparsityPattern::from_rows(n_dofs, rows)?);

    let vol_rule = triangle_quadrature(volume_order(p))?;
    let edge_rule = edge_quadrature(edge_order(p))?;
    let (vol_vals, vol_grads) = tables(&basis, &vol_rule.points);
    let geo = mesh.geometry_basis();
    let (geo_vol_vals, geo_vol_grads) = tables(geo, &vol_rule.points);
    let face_tables = std::array::from_fn(|le| {
        let [a, b] = EDGE_VERTICES[le].map(|v| REF_VERTICES[v]);
        let tangent = [b[0] - a[0], b[1] - a[1]];
        let points: Vec<Point> =
            edge_rule.points.iter().map(|s| [a[0] + s * tangent[0], a[1] + s * tangent[1]]).collect();
        let (vals, _) = tables(&basis, &points);
        let (geo_vals, geo_grads) = tables(geo, &points);
        FaceTable { points, vals, geo_vals, geo_grads, tangent }
    });
    let boundary_faces = mesh.boundary_faces();
    Ok(Arc::new(FeSpace {
        mesh,
        basis,
        dofs,
        n_dofs,
        pattern,
        boundary_faces,
        vol_rule,
        edge_rule,
        vol_vals,
        vol_grads,
        geo_vol_grads,
        geo_vol_vals,
        face_tables,
        slots: OnceLock::new(),
    }))
}

impl FeSpace {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.basis.len()
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let n = self.basis.len();
        &self.dofs[t * n..(t + 1) * n]
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Boundary faces as (triangle, local edge).
    pub fn boundary_faces(&self) -> &[(usize, usize)] {
        &self.boundary_faces
    }

    pub fn volume_rule(&self) -> &TriangleRule {
        &self.vol_rule
    }

    pub fn edge_rule(&self) -> &LineRule {
        &self.edge_rule
    }

    /// Reference basis values at volume quadrature points, `[q * nloc + i]`.
    pub fn volume_values(&self) -> &[f64] {
        &self.vol_vals
    }

    /// Physical points, weights and gradients of element `t`.
    pub fn element_values(&self, t: usize, ev: &mut ElementValues) {
        let nq = self.vol_rule.len();
        let nloc = self.basis.len();
        ev.points.clear();
        ev.jxw.clear();
        ev.grads.clear();
        let mesh = &*self.mesh;
        match mesh.curved_map(t) {
            None => {
                let j = mesh.affine_jacobian(t);
                let (m, d) = inv_transpose(&j);
                let a = mesh.vertices()[mesh.triangle(t)[0]];
                for (q, xi) in self.vol_rule.points.iter().enumerate() {
                    ev.points.push([
                        a[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
                        a[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
                    ]);
                    ev.jxw.push(self.vol_rule.weights[q] * d);
                    ev.grads.extend(self.vol_grads[q * nloc..(q + 1) * nloc].iter().map(|g| apply(&m, *g)));
                }
            }
            Some(cm) => {
                let ng = cm.nodes.len();
                for q in 0..nq {
                    let gv = &self.geo_vol_vals[q * ng..(q + 1) * ng];
                    let mut x = [0.0; 2];
                    for (v, n) in gv.iter().zip(&cm.nodes) {
                        x[0] += v * n[0];
                        x[1] += v * n[1];
                    }
                    let j = jacobian_from_nodes(&cm.nodes, &self.geo_vol_grads[q * ng..(q + 1) * ng]);
                    let (m, d) = inv_transpose(&j);
                    ev.points.push(x);
                    ev.jxw.push(self.vol_rule.weights[q] * d);
                    ev.grads.extend(self.vol_grads[q * nloc..(q + 1) * nloc].iter().map(|g| apply(&m, *g)));
                }
            }
        }
    }

    /// Quadrature data on local edge `le` of triangle `t`, with the outward
    /// unit normal of the discrete boundary.
    pub fn face_values(&self, t: usize, le: usize, fv: &mut FaceValues) {
        let ft = &self.face_tables[le];
        let nloc = self.basis.len();
        fv.points.clear();
        fv.jxw.clear();
        fv.normals.clear();
        fv.vals.clear();
        fv.vals.extend_from_slice(&ft.vals);
        let mesh = &*self.mesh;
        for (q, w) in self.edge_rule.weights.iter().enumerate() {
            let (x, j) = match mesh.curved_map(t) {
                None => (mesh.map(t, ft.points[q]), mesh.affine_jacobian(t)),
                Some(cm) => {
                    let ng = cm.nodes.len();
                    let gv = &ft.geo_vals[q * ng..(q + 1) * ng];
                    let mut x = [0.0; 2];
                    for (v, n) in gv.iter().zip(&cm.nodes) {
                        x[0] += v * n[0];
                        x[1] += v * n[1];
                    }
                    (x, jacobian_from_nodes(&cm.nodes, &ft.geo_grads[q * ng..(q + 1) * ng]))
                }
            };
            let tan = [
                j[0][0] * ft.tangent[0] + j[0][1] * ft.tangent[1],
                j[1][0] * ft.tangent[0] + j[1][1] * ft.tangent[1],
            ];
            let len = tan[0].hypot(tan[1]);
            fv.points.push(x);
            fv.jxw.push(w * len);
            // Counterclockwise walk: the outward normal is on the right.
            fv.normals.push([tan[1] / len, -tan[0] / len]);
        }
        debug_assert_eq!(fv.vals.len(), self.edge_rule.weights.len() * nloc);
    }

    /// Physical positions of all dofs.
    pub fn dof_points(&self) -> Vec<Point> {
        let mut pts = vec![[0.0; 2]; self.n_dofs];
        let nodes = self.basis.nodes();
        for t in 0..self.mesh.n_triangles() {
            for (i, &d) in self.element_dofs(t).iter().enumerate() {
                pts[d] = self.mesh.map(t, nodes[i]);
            }
        }
        pts
    }

    /// Position in the matrix value array of each local entry `(i, j)`,
    /// laid out as `[t * nloc^2 + i * nloc + j]`. Built on first use.
    pub fn element_slots(&self) -> &[u32] {
        self.slots.get_or_init(|| {
            assert!(self.pattern.nnz() < u32::MAX as usize, "pattern too large for 32-bit slots");
            let nloc = self.n_local();
            let mut slots = Vec::with_capacity(self.mesh.n_triangles() * nloc * nloc);
            for t in 0..self.mesh.n_triangles() {
                let dofs = self.element_dofs(t);
                for &i in dofs {
                    let start = self.pattern.row_ptr()[i];
                    let row = self.pattern.row(i);
                    for &j in dofs {
                        let pos = row.binary_search(&j).expect("pattern covers element couplings");
                        slots.push((start + pos) as u32);
                    }
                }
            }
            slots
        })
    }

    /// Dofs located on the outer boundary.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for &(t, le) in &self.boundary_faces {
            let dofs = self.element_dofs(t);
            let [a, b] = EDGE_VERTICES[le];
            out.push(dofs[a]);
            out.push(dofs[b]);
            out.extend(self.basis.edge_nodes(le).map(|i| dofs[i]));
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}
