use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use super::{CurvedMap, Edge, EdgeKind, Embedding, Mesh, ParentLink, Point, Region, DOMAIN_RADIUS, INTERFACE_RADIUS};
use crate::error::{FemError, Result};
use crate::lagrange::{LagrangeBasis, EDGE_VERTICES, MAX_DEGREE};
use crate::quadrature::gauss_legendre;

/// Refinement stops with a resource error beyond this many triangles
/// (level 9 has 4,194,304).
pub const MAX_TRIANGLES: usize = 4_194_304;

const RADIUS_TOL: f64 = 1e-12;

/// Reference embeddings of the four red-refinement children.
const CHILDREN: [Embedding; 4] = [
    Embedding { origin: [0.0, 0.0], axes: [[0.5, 0.0], [0.0, 0.5]] },
    Embedding { origin: [0.5, 0.0], axes: [[0.5, 0.0], [0.0, 0.5]] },
    Embedding { origin: [0.0, 0.5], axes: [[0.5, 0.0], [0.0, 0.5]] },
    Embedding { origin: [0.5, 0.5], axes: [[-0.5, 0.0], [0.0, -0.5]] },
];

fn check_degree(q: usize) -> Result<()> {
    if !(1..=MAX_DEGREE).contains(&q) {
        return Err(FemError::Argument(format!("geometric degree must be in 1..={MAX_DEGREE}, got {q}")));
    }
    Ok(())
}

fn polar(r: f64, deg: f64) -> Point {
    let a = deg * PI / 180.0;
    [r * a.cos(), r * a.sin()]
}

fn base_mesh(q: usize) -> Result<Mesh> {
    let mut vertices = vec![[0.0, 0.0]];
    let inner = |k: usize| 1 + k % 4;
    let outer = |m: usize| 5 + m % 8;
    for k in 0..4 {
        vertices.push(polar(INTERFACE_RADIUS, 90.0 * k as f64));
    }
    for m in 0..8 {
        vertices.push(polar(DOMAIN_RADIUS, 45.0 * m as f64));
    }
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    for k in 0..4 {
        triangles.push([0, inner(k), inner(k + 1)]);
        regions.push(Region::Inside);
    }
    for k in 0..4 {
        triangles.push([inner(k), outer(2 * k), outer(2 * k + 1)]);
        triangles.push([inner(k), outer(2 * k + 1), inner(k + 1)]);
        triangles.push([inner(k + 1), outer(2 * k + 1), outer(2 * k + 2)]);
        regions.extend([Region::Outside; 3]);
    }
    finish(vertices, triangles, regions, q, 0, None, Vec::new())
}

/// Mesh after `level` uniform refinements of the base template.
pub fn build_disk_mesh_level(level: usize, q: usize) -> Result<Arc<Mesh>> {
    check_degree(q)?;
    let needed = 16usize.checked_shl(2 * level as u32).filter(|&n| n >> (2 * level) == 16);
    if needed.map_or(true, |n| n > MAX_TRIANGLES) {
        return Err(FemError::Resource(format!("level {level} exceeds {MAX_TRIANGLES} triangles")));
    }
    let mut mesh = Arc::new(base_mesh(q)?);
    for _ in 0..level {
        mesh = refine(&mesh)?;
    }
    Ok(mesh)
}

/// Coarsest refinement level whose mesh size does not exceed `target_h`.
pub fn build_disk_mesh(target_h: f64, q: usize) -> Result<Arc<Mesh>> {
    check_degree(q)?;
    if !(target_h.is_finite() && target_h > 0.0) {
        return Err(FemError::Argument(format!("target mesh size must be positive, got {target_h}")));
    }
    let mut mesh = Arc::new(base_mesh(q)?);
    // Each refinement at least roughly halves h; refuse early rather than
    // building the largest admissible mesh first.
    let min_levels = ((mesh.h / target_h).log2().ceil() - 1.0).max(0.0);
    if min_levels > 16.0 || (mesh.n_triangles() << (2 * min_levels as u32)) > MAX_TRIANGLES {
        return Err(FemError::Resource(format!("target mesh size {target_h} needs more than {MAX_TRIANGLES} triangles")));
    }
    while mesh.h > target_h {
        mesh = refine(&mesh)?;
    }
    Ok(mesh)
}

/// One red refinement. New vertices on curved edges are placed on the arc.
pub fn refine(parent: &Arc<Mesh>) -> Result<Arc<Mesh>> {
    let nt = parent.n_triangles();
    if 4 * nt > MAX_TRIANGLES {
        return Err(FemError::Resource(format!("refining {nt} triangles exceeds {MAX_TRIANGLES}")));
    }
    let nv = parent.n_vertices();
    let mut vertices = parent.vertices.clone();
    vertices.reserve(parent.edges.len());
    for e in &parent.edges {
        let [a, b] = e.vertices.map(|v| parent.vertices[v]);
        let mut m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        if let Some(r) = e.kind.radius() {
            let len = m[0].hypot(m[1]);
            m = [r * m[0] / len, r * m[1] / len];
        }
        vertices.push(m);
    }
    let mut triangles = Vec::with_capacity(4 * nt);
    let mut regions = Vec::with_capacity(4 * nt);
    let mut links = Vec::with_capacity(4 * nt);
    for t in 0..nt {
        let [v0, v1, v2] = parent.triangles[t];
        let [m01, m12, m20] = parent.tri_edges[t].map(|e| nv + e);
        let children = [[v0, m01, m20], [m01, v1, m12], [m20, m12, v2], [m12, m20, m01]];
        for (c, emb) in children.into_iter().zip(CHILDREN) {
            triangles.push(c);
            regions.push(parent.regions[t]);
            links.push(ParentLink { parent: t, embedding: emb });
        }
    }
    Ok(Arc::new(finish(
        vertices,
        triangles,
        regions,
        parent.geometric_degree,
        parent.level + 1,
        Some(parent.clone()),
        links,
    )?))
}

/// Degree-`q` polynomial approximation of a circular arc: the
/// H1-seminorm projection of the uniform-angle parametrisation with both
/// endpoints kept. Its derivative is the L2 projection of the arc
/// derivative onto degree `q - 1`, expanded in shifted Legendre
/// polynomials.
#[derive(Debug, Clone)]
struct EdgeCurve {
    start: Point,
    coeffs: Vec<Point>,
}

/// Shifted Legendre polynomials on [0, 1] up to degree `n - 1`.
fn legendre01(n: usize, s: f64) -> Vec<f64> {
    let x = 2.0 * s - 1.0;
    let mut out = vec![1.0; n];
    if n > 1 {
        out[1] = x;
    }
    for m in 2..n {
        out[m] = ((2 * m - 1) as f64 * x * out[m - 1] - (m - 1) as f64 * out[m - 2]) / m as f64;
    }
    out
}

impl EdgeCurve {
    fn new(a: Point, b: Point, r: f64, q: usize) -> Self {
        let ta = a[1].atan2(a[0]);
        let mut dt = b[1].atan2(b[0]) - ta;
        if dt > PI {
            dt -= 2.0 * PI;
        } else if dt < -PI {
            dt += 2.0 * PI;
        }
        let (x, w) = gauss_legendre(16);
        let mut coeffs = vec![[0.0; 2]; q];
        for (xi, wi) in x.iter().zip(&w) {
            let s = 0.5 * (xi + 1.0);
            let th = ta + s * dt;
            let d = [-r * dt * th.sin(), r * dt * th.cos()];
            for (m, l) in legendre01(q, s).iter().enumerate() {
                let f = (2 * m + 1) as f64 * 0.5 * wi * l;
                coeffs[m][0] += f * d[0];
                coeffs[m][1] += f * d[1];
            }
        }
        Self { start: a, coeffs }
    }

    fn eval(&self, s: f64) -> Point {
        // Integrate the derivative from 0 to s; exact for degree <= 9.
        let (x, w) = gauss_legendre(5);
        let mut p = self.start;
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * s * (xi + 1.0);
            for (c, l) in self.coeffs.iter().zip(legendre01(self.coeffs.len(), t)) {
                p[0] += 0.5 * s * wi * l * c[0];
                p[1] += 0.5 * s * wi * l * c[1];
            }
        }
        p
    }
}

/// Map of a triangle whose local edge `le` is replaced by `curve`, at
/// barycentric coordinates `lam`. The edge deviation from the chord is
/// written as `s (1 - s) psi(s)` and extended as
/// `lam_a lam_b psi((1 + lam_b - lam_a) / 2)`, which is smooth on the
/// closed triangle and vanishes on the two straight edges.
fn blend(v: &[Point; 3], le: usize, curve: &EdgeCurve, lam: [f64; 3]) -> Point {
    let [ia, ib] = EDGE_VERTICES[le];
    let mut x = [0.0; 2];
    for k in 0..3 {
        x[0] += lam[k] * v[k][0];
        x[1] += lam[k] * v[k][1];
    }
    let (la, lb) = (lam[ia], lam[ib]);
    if la <= 0.0 || lb <= 0.0 {
        return x;
    }
    let s = 0.5 * (1.0 + lb - la);
    let (a, b) = (v[ia], v[ib]);
    let c = curve.eval(s);
    let w = la * lb / (s * (1.0 - s));
    x[0] += w * (c[0] - (1.0 - s) * a[0] - s * b[0]);
    x[1] += w * (c[1] - (1.0 - s) * a[1] - s * b[1]);
    x
}

fn diameter(points: &[Point]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d = d.max((points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]));
        }
    }
    d
}

pub(super) fn finish(
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    q: usize,
    level: usize,
    parent: Option<Arc<Mesh>>,
    parent_links: Vec<ParentLink>,
) -> Result<Mesh> {
    check_degree(q)?;
    let nv = vertices.len();
    if regions.len() != triangles.len() {
        return Err(FemError::Invariant("one region flag per triangle required".into()));
    }
    for (t, tri) in triangles.iter().enumerate() {
        if tri.iter().any(|&v| v >= nv) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(FemError::Invariant(format!("triangle {t} has invalid vertices {tri:?}")));
        }
        let [a, b, c] = tri.map(|v| vertices[v]);
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
        if !(area > 0.0) {
            return Err(FemError::Invariant(format!("triangle {t} is not positively oriented")));
        }
    }

    // Edge topology from sorted (min, max, triangle, local edge) records.
    let mut recs: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for (le, [a, b]) in EDGE_VERTICES.iter().enumerate() {
            let (u, w) = (tri[*a], tri[*b]);
            recs.push((u.min(w), u.max(w), t, le));
        }
    }
    recs.sort_unstable();
    let mut edges: Vec<Edge> = Vec::with_capacity(recs.len() / 2 + 8);
    let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];
    let mut i = 0;
    while i < recs.len() {
        let mut j = i + 1;
        while j < recs.len() && recs[j].0 == recs[i].0 && recs[j].1 == recs[i].1 {
            j += 1;
        }
        if j - i > 2 {
            return Err(FemError::Invariant(format!("edge {}-{} shared by {} triangles", recs[i].0, recs[i].1, j - i)));
        }
        let id = edges.len();
        let t0 = recs[i].2;
        let t1 = (j - i == 2).then(|| recs[i + 1].2);
        let kind = match t1 {
            None => EdgeKind::Boundary,
            Some(t1) if regions[t0] != regions[t1] => EdgeKind::Interface,
            Some(_) => EdgeKind::Interior,
        };
        if let Some(r) = kind.radius() {
            for v in [recs[i].0, recs[i].1] {
                let p = vertices[v];
                if (p[0].hypot(p[1]) - r).abs() > RADIUS_TOL {
                    return Err(FemError::Invariant(format!("{kind:?} edge vertex {v} is off the circle of radius {r}")));
                }
            }
        }
        for rec in &recs[i..j] {
            tri_edges[rec.2][rec.3] = id;
        }
        edges.push(Edge { vertices: [recs[i].0, recs[i].1], triangles: [Some(t0), t1], kind });
        i = j;
    }

    let geo_basis = LagrangeBasis::new(q);
    let ref_nodes = geo_basis.nodes();
    let mut curved = Vec::with_capacity(triangles.len());
    let mut h = 0.0f64;
    for (t, tri) in triangles.iter().enumerate() {
        let curved_edges: Vec<usize> = (0..3).filter(|&le| edges[tri_edges[t][le]].kind != EdgeKind::Interior).collect();
        if curved_edges.len() > 1 {
            return Err(FemError::Invariant(format!("triangle {t} has {} curved edges", curved_edges.len())));
        }
        let v = tri.map(|k| vertices[k]);
        let mut pts = v.to_vec();
        let map = curved_edges.first().map(|&le| {
            let r = edges[tri_edges[t][le]].kind.radius().expect("curved edge");
            let [ia, ib] = EDGE_VERTICES[le];
            // Arc length is measured on the exact circle, independent of q.
            let arc = EdgeCurve::new(v[ia], v[ib], r, MAX_DEGREE + 4);
            let curve = EdgeCurve::new(v[ia], v[ib], r, q);
            for s in 1..8 {
                let s = s as f64 / 8.0;
                let mut lam = [0.0; 3];
                lam[EDGE_VERTICES[le][0]] = 1.0 - s;
                lam[EDGE_VERTICES[le][1]] = s;
                pts.push(blend(&v, le, &arc, lam));
            }
            CurvedMap {
                edge: le,
                radius: r,
                nodes: ref_nodes.iter().map(|xi| blend(&v, le, &curve, [1.0 - xi[0] - xi[1], xi[0], xi[1]])).collect(),
            }
        });
        h = h.max(diameter(&pts));
        curved.push(if q >= 2 { map } else { None });
    }

    let mesh = Mesh {
        vertices,
        triangles,
        regions,
        edges,
        tri_edges,
        curved,
        geometric_degree: q,
        geo_basis,
        level,
        parent,
        parent_links,
        h,
        locator: OnceLock::new(),
    };
    for t in 0..mesh.n_triangles() {
        if mesh.curved[t].is_some() {
            let rule_pts = [[1.0 / 3.0, 1.0 / 3.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
            if rule_pts.iter().any(|p| !(super::det(&mesh.jacobian(t, *p)) > 0.0)) {
                return Err(FemError::Invariant(format!("curved triangle {t} has a non-positive Jacobian")));
            }
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_template_counts_and_size() {
        let m = base_mesh(1).unwrap();
        assert_eq!(m.n_vertices(), 13);
        assert_eq!(m.n_triangles(), 16);
        assert_eq!(m.edges.iter().filter(|e| e.kind == EdgeKind::Boundary).count(), 8);
        assert_eq!(m.edges.iter().filter(|e| e.kind == EdgeKind::Interface).count(), 4);
        // Euler: V - E + F = 1 for a disk.
        assert_eq!(m.n_vertices() as i64 - m.n_edges() as i64 + m.n_triangles() as i64, 1);
        let chord = 2.0 * (PI / 8.0).sin();
        assert!(m.h() >= chord && m.h() < 0.8);
    }

    #[test]
    fn edge_curve_keeps_endpoints_and_tracks_arc() {
        let (a, b) = (polar(1.0, 0.0), polar(1.0, 45.0));
        for q in 1..=4 {
            let c = EdgeCurve::new(a, b, 1.0, q);
            let (p0, p1) = (c.eval(0.0), c.eval(1.0));
            assert!((p0[0] - a[0]).abs() < 1e-15 && (p0[1] - a[1]).abs() < 1e-15);
            assert!((p1[0] - b[0]).abs() < 1e-14 && (p1[1] - b[1]).abs() < 1e-14);
        }
        // Radial deviation shrinks with the degree.
        let dev = |q| (0..=50).map(|i| {
            let p = EdgeCurve::new(a, b, 1.0, q).eval(i as f64 / 50.0);
            (p[0].hypot(p[1]) - 1.0).abs()
        }).fold(0.0, f64::max);
        let d: Vec<f64> = (1..=4).map(dev).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
        assert!(d[3] < 1e-5, "{d:?}");
    }

    #[test]
    fn blend_follows_curve_and_keeps_straight_edges() {
        let v = [[1.0, 0.0], [0.0, 1.0], [0.2, 0.2]];
        let curve = EdgeCurve::new(v[0], v[1], 1.0, 4);
        let mid = blend(&v, 0, &curve, [0.5, 0.5, 0.0]);
        let want = curve.eval(0.5);
        assert!((mid[0] - want[0]).abs() < 1e-15 && (mid[1] - want[1]).abs() < 1e-15);
        assert!((mid[0].hypot(mid[1]) - 1.0).abs() < 1e-4);
        let straight = blend(&v, 0, &curve, [0.0, 0.3, 0.7]);
        assert!((straight[0] - 0.14).abs() < 1e-14 && (straight[1] - 0.44).abs() < 1e-14);
    }

    #[test]
    fn refinement_quadruples_and_halves() {
        let m0 = Arc::new(base_mesh(2).unwrap());
        let m1 = refine(&m0).unwrap();
        let m2 = refine(&m1).unwrap();
        assert_eq!(m2.n_triangles(), 256);
        assert_eq!(m2.n_vertices() as i64 - m2.n_edges() as i64 + m2.n_triangles() as i64, 1);
        assert!(m2.h() < 0.55 * m1.h() && m1.h() < 0.55 * m0.h());
    }

    #[test]
    fn level_guard_is_a_resource_error() {
        assert!(matches!(build_disk_mesh_level(10, 1), Err(FemError::Resource(_))));
        assert!(matches!(build_disk_mesh_level(40, 1), Err(FemError::Resource(_))));
    }
}
