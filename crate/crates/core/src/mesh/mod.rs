//! Triangulations of the unit disk that resolve the circle of radius 0.5.
//!
//! Level 0 is a fixed 16-triangle template; level `j` is `j` uniform red
//! refinements of it. Edges on the outer circle and on the inner circle are
//! curved: with geometric degree `q >= 2` each triangle touching one of them
//! carries a degree-`q` Lagrange map interpolating a blended arc map, while
//! all other triangles stay affine.

mod build;
mod dump;
mod locate;

use std::sync::{Arc, OnceLock};

use crate::error::{FemError, Result};
use crate::lagrange::{LagrangeBasis, EDGE_VERTICES};

pub use build::{build_disk_mesh, build_disk_mesh_level, refine, MAX_TRIANGLES};
pub use dump::DUMP_HEADER;
use locate::Locator;

pub type Point = [f64; 2];

pub const DOMAIN_RADIUS: f64 = 1.0;
pub const INTERFACE_RADIUS: f64 = 0.5;

/// Which side of the inner circle a triangle lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Inside,
    Outside,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Inside => "IN_D",
            Region::Outside => "OUT_D",
        }
    }

    /// Indicator of the nonlinear subdomain.
    pub fn chi(self) -> f64 {
        match self {
            Region::Inside => 1.0,
            Region::Outside => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Interface,
    Boundary,
}

impl EdgeKind {
    pub fn radius(self) -> Option<f64> {
        match self {
            EdgeKind::Interior => None,
            EdgeKind::Interface => Some(INTERFACE_RADIUS),
            EdgeKind::Boundary => Some(DOMAIN_RADIUS),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Sorted global vertex indices.
    pub vertices: [usize; 2],
    /// Adjacent triangles; the second is `None` on the boundary.
    pub triangles: [Option<usize>; 2],
    pub kind: EdgeKind,
}

/// Degree-`q` map of a triangle with one curved edge.
#[derive(Debug, Clone)]
pub struct CurvedMap {
    /// Local index of the curved edge.
    pub edge: usize,
    pub radius: f64,
    /// Physical positions of the degree-`q` Lagrange nodes.
    pub nodes: Vec<Point>,
}

/// Affine map from a child's reference triangle into its parent's.
#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub origin: Point,
    pub axes: [Point; 2],
}

impl Embedding {
    pub const IDENTITY: Embedding = Embedding {
        origin: [0.0, 0.0],
        axes: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub fn apply(&self, xi: Point) -> Point {
        [
            self.origin[0] + xi[0] * self.axes[0][0] + xi[1] * self.axes[1][0],
            self.origin[1] + xi[0] * self.axes[0][1] + xi[1] * self.axes[1][1],
        ]
    }

    /// `outer` after `self`.
    pub fn then(&self, outer: &Embedding) -> Embedding {
        let o = outer.apply(self.origin);
        let a = |v: Point| [v[0] * outer.axes[0][0] + v[1] * outer.axes[1][0], v[0] * outer.axes[0][1] + v[1] * outer.axes[1][1]];
        Embedding {
            origin: o,
            axes: [a(self.axes[0]), a(self.axes[1])],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParentLink {
    pub parent: usize,
    pub embedding: Embedding,
}

pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    edges: Vec<Edge>,
    /// Global edge of each local edge, local edges ordered as in [`EDGE_VERTICES`].
    tri_edges: Vec<[usize; 3]>,
    curved: Vec<Option<CurvedMap>>,
    geometric_degree: usize,
    geo_basis: LagrangeBasis,
    level: usize,
    parent: Option<Arc<Mesh>>,
    parent_links: Vec<ParentLink>,
    h: f64,
    locator: OnceLock<Locator>,
}

impl std::fmt::Debug for Mesh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mesh")
            .field("level", &self.level)
            .field("geometric_degree", &self.geometric_degree)
            .field("vertices", &self.vertices.len())
            .field("triangles", &self.triangles.len())
            .field("h", &self.h)
            .finish()
    }
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn region(&self, t: usize) -> Region {
        self.regions[t]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn curved_map(&self, t: usize) -> Option<&CurvedMap> {
        self.curved[t].as_ref()
    }

    pub fn n_curved(&self) -> usize {
        self.curved.iter().filter(|c| c.is_some()).count()
    }

    pub fn geometric_degree(&self) -> usize {
        self.geometric_degree
    }

    pub fn geometry_basis(&self) -> &LagrangeBasis {
        &self.geo_basis
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Largest element diameter, curved edges measured along the arc.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn parent(&self) -> Option<&Arc<Mesh>> {
        self.parent.as_ref()
    }

    pub fn parent_link(&self, t: usize) -> Option<ParentLink> {
        self.parent_links.get(t).copied()
    }

    /// Boundary edges as (triangle, local edge) pairs, in edge order.
    pub fn boundary_faces(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Boundary)
            .map(|e| {
                let t = e.triangles[0].expect("edge has a triangle");
                let le = (0..3).find(|&l| self.edges[self.tri_edges[t][l]].vertices == e.vertices).expect("local edge");
                (t, le)
            })
            .collect()
    }

    /// Ancestor of triangle `t` on `level` and the composed embedding of
    /// `t`'s reference triangle into the ancestor's.
    pub fn ancestor(&self, t: usize, level: usize) -> Result<(usize, Embedding)> {
        if level > self.level {
            return Err(FemError::Argument(format!("level {level} is finer than mesh level {}", self.level)));
        }
        let mut mesh = self;
        let mut tri = t;
        let mut emb = Embedding::IDENTITY;
        while mesh.level > level {
            let link = mesh.parent_links.get(tri).ok_or_else(|| {
                FemError::Argument(format!("mesh at level {} has no refinement history", mesh.level))
            })?;
            emb = emb.then(&link.embedding);
            tri = link.parent;
            mesh = mesh.parent.as_deref().expect("parent mesh present when links exist");
        }
        Ok((tri, emb))
    }

    /// Physical image of reference point `xi` in triangle `t`.
    pub fn map(&self, t: usize, xi: Point) -> Point {
        match &self.curved[t] {
            None => {
                let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
                [
                    a[0] + xi[0] * (b[0] - a[0]) + xi[1] * (c[0] - a[0]),
                    a[1] + xi[0] * (b[1] - a[1]) + xi[1] * (c[1] - a[1]),
                ]
            }
            Some(cm) => {
                let vals = self.geo_basis.values(xi);
                let mut x = [0.0; 2];
                for (v, n) in vals.iter().zip(&cm.nodes) {
                    x[0] += v * n[0];
                    x[1] += v * n[1];
                }
                x
            }
        }
    }

    /// Jacobian `J[r][c] = d x_r / d xi_c` at `xi`.
    pub fn jacobian(&self, t: usize, xi: Point) -> [[f64; 2]; 2] {
        match &self.curved[t] {
            None => self.affine_jacobian(t),
            Some(cm) => {
                let grads = self.geo_basis.grads(xi);
                jacobian_from_nodes(&cm.nodes, &grads)
            }
        }
    }

    pub fn affine_jacobian(&self, t: usize) -> [[f64; 2]; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]]
    }

    /// Newton inverse of the element map. Returns the reference point and
    /// whether the iteration converged.
    pub fn inverse_map(&self, t: usize, x: Point, guess: Point) -> (Point, bool) {
        if self.curved[t].is_none() {
            let j = self.affine_jacobian(t);
            let a = self.vertices[self.triangles[t][0]];
            let (d, ok) = solve2(&j, [x[0] - a[0], x[1] - a[1]]);
            return (d, ok);
        }
        let mut xi = guess;
        let scale = self.h.max(1e-300);
        for _ in 0..INVERSE_MAX_ITER {
            let f = self.map(t, xi);
            let r = [x[0] - f[0], x[1] - f[1]];
            if r[0].hypot(r[1]) <= INVERSE_TOL * scale {
                return (xi, true);
            }
            let (d, ok) = solve2(&self.jacobian(t, xi), r);
            if !ok {
                return (xi, false);
            }
            xi = [xi[0] + d[0], xi[1] + d[1]];
            if !(xi[0].is_finite() && xi[1].is_finite()) || xi[0].abs() > 10.0 || xi[1].abs() > 10.0 {
                return (xi, false);
            }
        }
        let f = self.map(t, xi);
        let ok = (x[0] - f[0]).hypot(x[1] - f[1]) <= 1e3 * INVERSE_TOL * scale;
        (xi, ok)
    }

    /// Triangle containing `x` and the reference coordinates of `x` in it.
    ///
    /// Points up to `1 + 1e-12` from the origin, or on the discrete
    /// boundary where it passes outside the circle, are accepted. Points in
    /// the closed unit disk that fall just outside the discrete boundary (the gap between a chord and its arc) are assigned to the
    /// nearest boundary triangle; the coordinates then lie slightly outside
    /// the reference triangle.
    pub fn locate_point(&self, x: Point) -> Result<(usize, Point)> {
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(FemError::NotFound { x: x[0], y: x[1] });
        }
        let locator = self.locator.get_or_init(|| Locator::new(self));
        if x[0].hypot(x[1]) > locator.reach + 1e-12 {
            return Err(FemError::NotFound { x: x[0], y: x[1] });
        }
        locator.locate(self, x)
    }

    /// Area of the discrete domain, by quadrature of the Jacobian.
    pub fn area(&self) -> f64 {
        let rule = crate::quadrature::triangle_quadrature(2 * self.geometric_degree).expect("small order");
        (0..self.n_triangles())
            .map(|t| match self.curved[t] {
                None => 0.5 * det(&self.affine_jacobian(t)).abs(),
                Some(_) => rule.points.iter().zip(&rule.weights).map(|(p, w)| w * det(&self.jacobian(t, *p))).sum(),
            })
            .sum()
    }

    /// Signed area of the straight triangle through the vertices.
    pub fn straight_area(&self, t: usize) -> f64 {
        0.5 * det(&self.affine_jacobian(t))
    }

    pub fn local_edge_vertices(&self, t: usize, le: usize) -> [usize; 2] {
        let tri = self.triangles[t];
        EDGE_VERTICES[le].map(|l| tri[l])
    }
}

const INVERSE_MAX_ITER: usize = 30;
const INVERSE_TOL: f64 = 1e-12;

pub(crate) fn det(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

pub(crate) fn jacobian_from_nodes(nodes: &[Point], grads: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let mut j = [[0.0; 2]; 2];
    for (n, g) in nodes.iter().zip(grads) {
        j[0][0] += n[0] * g[0];
        j[0][1] += n[0] * g[1];
        j[1][0] += n[1] * g[0];
        j[1][1] += n[1] * g[1];
    }
    j
}

/// Solves `J d = r`.
fn solve2(j: &[[f64; 2]; 2], r: [f64; 2]) -> ([f64; 2], bool) {
    let d = det(j);
    let scale = j.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if d.abs() <= 1e-14 * scale * scale || !d.is_finite() {
        return ([0.0; 2], false);
    }
    ([(j[1][1] * r[0] - j[0][1] * r[1]) / d, (j[0][0] * r[1] - j[1][0] * r[0]) / d], true)
}

/// Distance of a reference point outside the reference triangle, 0 inside.
pub fn reference_violation(xi: Point) -> f64 {
    0.0f64.max(-xi[0]).max(-xi[1]).max(xi[0] + xi[1] - 1.0)
}
