use super::{reference_violation, Mesh, Point};
use crate::error::{FemError, Result};
use crate::lagrange::{EDGE_VERTICES, REF_VERTICES};

/// Reference coordinates within this distance of the triangle count as inside.
const INSIDE_TOL: f64 = 1e-10;

/// Uniform bucket grid over [-1, 1]^2 holding triangle bounding boxes.
pub(super) struct Locator {
    n: usize,
    cell: f64,
    ptr: Vec<usize>,
    items: Vec<usize>,
    /// Largest radius reached by the discrete boundary; polynomial edges
    /// can pass slightly outside the unit circle between their nodes.
    pub reach: f64,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let nt = mesh.n_triangles();
        let n = ((nt as f64).sqrt().ceil() as usize).clamp(1, 2048);
        let cell = 2.0 / n as f64;
        let boxes: Vec<(usize, usize, usize, usize)> = (0..nt)
            .map(|t| {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                let mut extend = |p: &Point| {
                    for d in 0..2 {
                        lo[d] = lo[d].min(p[d]);
                        hi[d] = hi[d].max(p[d]);
                    }
                };
                mesh.triangle(t).iter().for_each(|&v| extend(&mesh.vertices()[v]));
                if let Some(c) = mesh.curved_map(t) {
                    c.nodes.iter().for_each(&mut extend);
                }
                // Curved images may bulge slightly past their nodes.
                let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]) + 1e-12;
                let idx = |v: f64| (((v + 1.0) / cell).floor().max(0.0) as usize).min(n - 1);
                (idx(lo[0] - pad), idx(hi[0] + pad), idx(lo[1] - pad), idx(hi[1] + pad))
            })
            .collect();
        let mut count = vec![0usize; n * n + 1];
        for &(x0, x1, y0, y1) in &boxes {
            for i in x0..=x1 {
                for j in y0..=y1 {
                    count[i * n + j + 1] += 1;
                }
            }
        }
        for c in 1..count.len() {
            count[c] += count[c - 1];
        }
        let mut fill = count.clone();
        let mut items = vec![0usize; count[n * n]];
        for (t, &(x0, x1, y0, y1)) in boxes.iter().enumerate() {
            for i in x0..=x1 {
                for j in y0..=y1 {
                    items[fill[i * n + j]] = t;
                    fill[i * n + j] += 1;
                }
            }
        }
        let mut reach = super::DOMAIN_RADIUS;
        for (t, le) in mesh.boundary_faces() {
            if mesh.curved_map(t).is_none() {
                continue;
            }
            let [a, b] = EDGE_VERTICES[le].map(|i| REF_VERTICES[i]);
            for i in 1..32 {
                let s = i as f64 / 32.0;
                let x = mesh.map(t, [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                reach = reach.max(x[0].hypot(x[1]));
            }
        }
        Self { n, cell, ptr: count, items, reach }
    }

    fn cell_of(&self, x: Point) -> (usize, usize) {
        let idx = |v: f64| (((v + 1.0) / self.cell).floor().max(0.0) as usize).min(self.n - 1);
        (idx(x[0]), idx(x[1]))
    }

    fn candidates(&self, i: usize, j: usize) -> &[usize] {
        let c = i * self.n + j;
        &self.items[self.ptr[c]..self.ptr[c + 1]]
    }

    pub fn locate(&self, mesh: &Mesh, x: Point) -> Result<(usize, Point)> {
        let (ci, cj) = self.cell_of(x);
        let mut best: Option<(f64, usize, Point)> = None;
        let consider = |t: usize, best: &mut Option<(f64, usize, Point)>| -> bool {
            let (xi, ok) = mesh.inverse_map(t, x, [1.0 / 3.0, 1.0 / 3.0]);
            if !ok {
                return false;
            }
            let viol = reference_violation(xi);
            if viol <= INSIDE_TOL {
                *best = Some((viol, t, xi));
                return true;
            }
            if best.map_or(true, |(b, _, _)| viol < b) {
                *best = Some((viol, t, xi));
            }
            false
        };
        for &t in self.candidates(ci, cj) {
            if consider(t, &mut best) {
                return Ok((t, best.unwrap().2));
            }
        }
        // Fallback for points in the sliver between a boundary chord and
        // the circle: nearest triangle among the neighbouring cells.
        let lo = |c: usize| c.saturating_sub(1);
        let hi = |c: usize| (c + 1).min(self.n - 1);
        for i in lo(ci)..=hi(ci) {
            for j in lo(cj)..=hi(cj) {
                if (i, j) == (ci, cj) {
                    continue;
                }
                for &t in self.candidates(i, j) {
                    if consider(t, &mut best) {
                        return Ok((t, best.unwrap().2));
                    }
                }
            }
        }
        match best {
            Some((viol, t, xi)) if viol <= 0.5 => Ok((t, xi)),
            _ => Err(FemError::NotFound { x: x[0], y: x[1] }),
        }
    }
}
