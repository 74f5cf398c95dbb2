//! Gauss rules on the unit interval and collapsed Gauss rules on the
//! reference triangle.

use crate::error::{FemError, Result};

/// Highest polynomial order a rule may be requested for.
pub const MAX_ORDER: usize = 20;

#[derive(Debug, Clone)]
pub struct LineRule {
    /// Points in [0, 1].
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// Points in the reference triangle (0,0), (1,0), (0,1).
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn check_order(order: usize) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(FemError::Argument(format!("quadrature order must be in 1..={MAX_ORDER}, got {order}")));
    }
    Ok(())
}

/// Gauss rule on [0, 1] exact for polynomials of degree `order`.
pub fn edge_quadrature(order: usize) -> Result<LineRule> {
    check_order(order)?;
    let n = order / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(LineRule {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
    })
}

/// Collapsed tensor Gauss rule on the reference triangle, exact for
/// polynomials of total degree `order`. Weights sum to 1/2.
pub fn triangle_quadrature(order: usize) -> Result<TriangleRule> {
    check_order(order)?;
    let n = (order + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let line: Vec<(f64, f64)> = x.iter().zip(&w).map(|(t, w)| (0.5 * (t + 1.0), 0.5 * w)).collect();
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for &(u, wu) in &line {
        for &(v, wv) in &line {
            points.push([u, (1.0 - u) * v]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    Ok(TriangleRule { points, weights, order })
}
