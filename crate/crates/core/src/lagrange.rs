//! Lagrange bases on the reference triangle with vertices (0,0), (1,0),
//! (0,1) and equispaced nodes.
//!
//! Local node order: the three vertices, then the interior nodes of edges
//! 0 -> 1, 1 -> 2 and 2 -> 0 (each walked from its first vertex), then the
//! element-interior nodes. Basis functions use the product form over
//! barycentric coordinates, so each one is exactly 1 at its node and 0 at
//! every other node.

/// Local vertex pairs of the three reference edges, counterclockwise.
pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// Reference coordinates of the triangle vertices.
pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    degree: usize,
    /// Barycentric multi-index of each node, summing to `degree`.
    multi: Vec<[usize; 3]>,
}

/// `(p t - 0)(p t - 1)...(p t - (a-1)) / a!` and its derivative in `t`.
fn factor(p: usize, a: usize, t: f64) -> (f64, f64) {
    let pt = p as f64 * t;
    let mut val = 1.0;
    let mut der = 0.0;
    for m in 0..a {
        let c = (m + 1) as f64;
        let term = (pt - m as f64) / c;
        der = der * term + val * (p as f64) / c;
        val *= term;
    }
    (val, der)
}

impl LagrangeBasis {
    /// # Panics
    /// If `degree` is 0 or above [`MAX_DEGREE`].
    pub fn new(degree: usize) -> Self {
        assert!((1..=MAX_DEGREE).contains(&degree), "degree {degree} unsupported");
        let p = degree;
        let mut multi = vec![[p, 0, 0], [0, p, 0], [0, 0, p]];
        for j in 1..p {
            multi.push([p - j, j, 0]);
        }
        for j in 1..p {
            multi.push([0, p - j, j]);
        }
        for j in 1..p {
            multi.push([j, 0, p - j]);
        }
        for a1 in 1..p {
            for a2 in 1..p {
                if a1 + a2 < p {
                    multi.push([p - a1 - a2, a1, a2]);
                }
            }
        }
        Self { degree, multi }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.multi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multi.is_empty()
    }

    /// Nodes per edge interior.
    pub fn edge_interior(&self) -> usize {
        self.degree - 1
    }

    pub fn cell_interior(&self) -> usize {
        (self.degree - 1) * self.degree.saturating_sub(2) / 2
    }

    /// Local indices of the interior nodes of edge `e`, in walking order.
    pub fn edge_nodes(&self, e: usize) -> std::ops::Range<usize> {
        let start = 3 + e * self.edge_interior();
        start..start + self.edge_interior()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        let p = self.degree as f64;
        [self.multi[i][1] as f64 / p, self.multi[i][2] as f64 / p]
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn eval(&self, xi: [f64; 2], out: &mut [f64]) {
        let lam = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        for (o, a) in out.iter_mut().zip(&self.multi) {
            *o = (0..3).map(|r| factor(self.degree, a[r], lam[r]).0).product();
        }
    }

    /// Gradients with respect to the reference coordinates.
    pub fn eval_grad(&self, xi: [f64; 2], out: &mut [[f64; 2]]) {
        let lam = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        // d(lambda_r)/d(xi)
        const DLAM: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        for (o, a) in out.iter_mut().zip(&self.multi) {
            let f: [(f64, f64); 3] = std::array::from_fn(|r| factor(self.degree, a[r], lam[r]));
            let mut g = [0.0; 2];
            for r in 0..3 {
                let others: f64 = (0..3).filter(|&s| s != r).map(|s| f[s].0).product();
                g[0] += f[r].1 * others * DLAM[r][0];
                g[1] += f[r].1 * others * DLAM[r][1];
            }
            *o = g;
        }
    }

    pub fn values(&self, xi: [f64; 2]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.eval(xi, &mut v);
        v
    }

    pub fn grads(&self, xi: [f64; 2]) -> Vec<[f64; 2]> {
        let mut g = vec![[0.0; 2]; self.len()];
        self.eval_grad(xi, &mut g);
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        for p in 1..=4 {
            let b = LagrangeBasis::new(p);
            assert_eq!(b.len(), (p + 1) * (p + 2) / 2);
            assert_eq!(3 + 3 * b.edge_interior() + b.cell_interior(), b.len());
        }
    }

    #[test]
    fn kronecker_property_at_nodes() {
        for p in 1..=4 {
            let b = LagrangeBasis::new(p);
            for i in 0..b.len() {
                let v = b.values(b.node(i));
                for (j, vj) in v.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - expect).abs() < 1e-13, "p={p} node {i} basis {j}: {vj}");
                }
            }
        }
    }

    #[test]
    fn edge_nodes_lie_on_their_edge_in_order() {
        let b = LagrangeBasis::new(4);
        for (e, [a, c]) in EDGE_VERTICES.iter().enumerate() {
            let (pa, pc) = (REF_VERTICES[*a], REF_VERTICES[*c]);
            for (k, i) in b.edge_nodes(e).enumerate() {
                let t = (k + 1) as f64 / 4.0;
                let want = [pa[0] + t * (pc[0] - pa[0]), pa[1] + t * (pc[1] - pa[1])];
                let got = b.node(i);
                assert!((got[0] - want[0]).abs() < 1e-15 && (got[1] - want[1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-6;
        for p in 1..=4 {
            let b = LagrangeBasis::new(p);
            for xi in [[0.2, 0.3], [0.1, 0.75], [0.45, 0.05], [1.0 / 3.0, 1.0 / 3.0]] {
                let g = b.grads(xi);
                let xp = b.values([xi[0] + h, xi[1]]);
                let xm = b.values([xi[0] - h, xi[1]]);
                let yp = b.values([xi[0], xi[1] + h]);
                let ym = b.values([xi[0], xi[1] - h]);
                for i in 0..b.len() {
                    let fd = [(xp[i] - xm[i]) / (2.0 * h), (yp[i] - ym[i]) / (2.0 * h)];
                    assert!((fd[0] - g[i][0]).abs() < 1e-6 && (fd[1] - g[i][1]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn reproduces_polynomials_up_to_degree() {
        for p in 1..=4 {
            let b = LagrangeBasis::new(p);
            let nodes = b.nodes();
            for a in 0..=p {
                for c in 0..=(p - a) {
                    let f = |x: [f64; 2]| x[0].powi(a as i32) * x[1].powi(c as i32);
                    let coeff: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
                    for xi in [[0.13, 0.21], [0.6, 0.3], [0.05, 0.9]] {
                        let v = b.values(xi);
                        let interp: f64 = v.iter().zip(&coeff).map(|(a, b)| a * b).sum();
                        assert!((interp - f(xi)).abs() < 1e-13);
                    }
                }
            }
        }
    }
}
