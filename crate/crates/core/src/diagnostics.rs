//! Norms, discretization errors and convergence rates.

use std::io::Write;
use std::sync::Arc;

use nlhelm_sparse::SparseMatrixC;
use num_complex::Complex64;

use crate::assembly::assemble_operators;
use crate::error::{FemError, Result};
use crate::field::FeField;
use crate::mesh::{det, Mesh, Point};
use crate::quadrature::triangle_quadrature;
use crate::space::{ElementValues, FeSpace};

/// `|u|_1^2 + k^2 |u|_0^2` from cached stiffness and mass matrices.
#[derive(Debug, Clone)]
pub struct EnergyNorm {
    space: Arc<FeSpace>,
    stiffness: SparseMatrixC,
    mass: SparseMatrixC,
}

fn hermitian_form(m: &SparseMatrixC, u: &[Complex64]) -> f64 {
    let mu = m.matvec(u).expect("length checked by caller");
    let v: Complex64 = u.iter().zip(&mu).map(|(a, b)| a.conj() * b).sum();
    debug_assert!(v.im.abs() <= 1e-12 * v.re.abs().max(1e-300) + 1e-280, "imaginary leakage {v}");
    v.re.max(0.0)
}

impl EnergyNorm {
    pub fn new(space: &Arc<FeSpace>) -> Self {
        let ops = assemble_operators(space);
        Self {
            space: space.clone(),
            stiffness: ops.stiffness,
            mass: ops.mass,
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Squared seminorm and squared L2 norm of a coefficient vector.
    pub fn parts(&self, u: &[Complex64]) -> (f64, f64) {
        assert_eq!(u.len(), self.space.n_dofs(), "coefficient length");
        (hermitian_form(&self.stiffness, u), hermitian_form(&self.mass, u))
    }

    pub fn norm(&self, u: &[Complex64], k: f64) -> f64 {
        let (s, m) = self.parts(u);
        (s + k * k * m).sqrt()
    }
}

pub fn energy_norm(field: &FeField, k: f64) -> f64 {
    EnergyNorm::new(field.space()).norm(field.coeffs(), k)
}

pub fn l2_norm(field: &FeField) -> f64 {
    EnergyNorm::new(field.space()).parts(field.coeffs()).1.sqrt()
}

/// Energy norm by direct elementwise quadrature, without matrices.
pub fn energy_norm_quadrature(field: &FeField, k: f64) -> f64 {
    let space = field.space();
    let nloc = space.n_local();
    let vals = space.volume_values();
    let c = field.coeffs();
    let mut ev = ElementValues::default();
    let mut total = 0.0;
    for t in 0..space.mesh().n_triangles() {
        space.element_values(t, &mut ev);
        let dofs = space.element_dofs(t);
        for q in 0..ev.jxw.len() {
            let mut u = Complex64::new(0.0, 0.0);
            let mut g = [Complex64::new(0.0, 0.0); 2];
            for i in 0..nloc {
                let ci = c[dofs[i]];
                u += ci * vals[q * nloc + i];
                g[0] += ci * ev.grads[q * nloc + i][0];
                g[1] += ci * ev.grads[q * nloc + i][1];
            }
            total += ev.jxw[q] * (g[0].norm_sqr() + g[1].norm_sqr() + k * k * u.norm_sqr());
        }
    }
    total.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPair {
    pub abs_energy: f64,
    pub abs_l2: f64,
    /// Norms of the comparison function.
    pub ref_energy: f64,
    pub ref_l2: f64,
}

impl ErrorPair {
    pub fn rel_energy(&self) -> f64 {
        self.abs_energy / self.ref_energy
    }

    pub fn rel_l2(&self) -> f64 {
        self.abs_l2 / self.ref_l2
    }
}

struct Accum {
    err_grad: f64,
    err_l2: f64,
    ref_grad: f64,
    ref_l2: f64,
}

impl Accum {
    fn new() -> Self {
        Self { err_grad: 0.0, err_l2: 0.0, ref_grad: 0.0, ref_l2: 0.0 }
    }

    fn add(&mut self, w: f64, u: Complex64, gu: [Complex64; 2], r: Complex64, gr: [Complex64; 2]) {
        self.err_grad += w * ((gu[0] - gr[0]).norm_sqr() + (gu[1] - gr[1]).norm_sqr());
        self.err_l2 += w * (u - r).norm_sqr();
        self.ref_grad += w * (gr[0].norm_sqr() + gr[1].norm_sqr());
        self.ref_l2 += w * r.norm_sqr();
    }

    fn finish(self, k: f64) -> ErrorPair {
        ErrorPair {
            abs_energy: (self.err_grad + k * k * self.err_l2).sqrt(),
            abs_l2: self.err_l2.sqrt(),
            ref_energy: (self.ref_grad + k * k * self.ref_l2).sqrt(),
            ref_l2: self.ref_l2.sqrt(),
        }
    }
}

/// Value and physical gradient of `field` at reference point `xi` of `t`.
fn value_and_grad(field: &FeField, t: usize, xi: Point) -> (Complex64, [Complex64; 2]) {
    let space = field.space();
    let basis = space.basis();
    let vals = basis.values(xi);
    let grads = basis.grads(xi);
    let j = space.mesh().jacobian(t, xi);
    let d = det(&j);
    let c = field.coeffs();
    let mut u = Complex64::new(0.0, 0.0);
    let mut g = [Complex64::new(0.0, 0.0); 2];
    for (i, &dof) in space.element_dofs(t).iter().enumerate() {
        let r = grads[i];
        let gx = (j[1][1] * r[0] - j[1][0] * r[1]) / d;
        let gy = (-j[0][1] * r[0] + j[0][0] * r[1]) / d;
        u += c[dof] * vals[i];
        g[0] += c[dof] * gx;
        g[1] += c[dof] * gy;
    }
    (u, g)
}

/// Whether `coarse` matches the ancestor of `fine` on its level.
fn shares_history(fine: &Mesh, coarse: &Mesh) -> bool {
    if coarse.level() > fine.level() {
        return false;
    }
    let mut m = fine;
    while m.level() > coarse.level() {
        match m.parent() {
            Some(p) => m = p,
            None => return false,
        }
    }
    m.n_triangles() == coarse.n_triangles()
        && m.triangles() == coarse.triangles()
        && m.vertices().iter().zip(coarse.vertices()).all(|(a, b)| (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12)
}

/// Energy and L2 errors of `coarse` against `reference`, by quadrature on
/// the reference mesh. Coarse values at fine quadrature points come from the
/// refinement history when the meshes share one, otherwise from point
/// location.
pub fn error_vs_reference(coarse: &FeField, reference: &FeField, k: f64) -> Result<ErrorPair> {
    let rspace = reference.space();
    let cspace = coarse.space();
    let fine = rspace.mesh();
    let cmesh = cspace.mesh();
    let history = shares_history(fine, cmesh);
    let nloc = rspace.n_local();
    let vals = rspace.volume_values();
    let rule = rspace.volume_rule();
    let rc = reference.coeffs();
    let mut ev = ElementValues::default();
    let mut acc = Accum::new();
    for t in 0..fine.n_triangles() {
        rspace.element_values(t, &mut ev);
        let dofs = rspace.element_dofs(t);
        let anc = if history { Some(fine.ancestor(t, cmesh.level())?) } else { None };
        for q in 0..ev.jxw.len() {
            let mut r = Complex64::new(0.0, 0.0);
            let mut gr = [Complex64::new(0.0, 0.0); 2];
            for i in 0..nloc {
                let ci = rc[dofs[i]];
                r += ci * vals[q * nloc + i];
                gr[0] += ci * ev.grads[q * nloc + i][0];
                gr[1] += ci * ev.grads[q * nloc + i][1];
            }
            let x = ev.points[q];
            let (tc, xi) = match anc {
                Some((tc, emb)) => {
                    let guess = emb.apply(rule.points[q]);
                    // Children of boundary elements are not affine images of
                    // their parent once new vertices move onto the circle.
                    let y = cmesh.map(tc, guess);
                    if cmesh.curved_map(tc).is_none() && (y[0] - x[0]).abs() + (y[1] - x[1]).abs() <= 1e-13 {
                        (tc, guess)
                    } else {
                        let (xi, ok) = cmesh.inverse_map(tc, x, guess);
                        (tc, if ok { xi } else { guess })
                    }
                }
                None => cmesh.locate_point(x).map_err(|e| {
                    FemError::Argument(format!("coarse mesh does not cover the reference mesh: {e}"))
                })?,
            };
            let (u, gu) = value_and_grad(coarse, tc, xi);
            acc.add(ev.jxw[q], u, gu, r, gr);
        }
    }
    Ok(acc.finish(k))
}

/// Errors against an exact solution given with its gradient.
pub fn error_vs_exact(
    field: &FeField,
    k: f64,
    exact: impl Fn(Point) -> Complex64,
    exact_grad: impl Fn(Point) -> [Complex64; 2],
) -> ErrorPair {
    let space = field.space();
    let nloc = space.n_local();
    let vals = space.volume_values();
    let c = field.coeffs();
    let mut ev = ElementValues::default();
    let mut acc = Accum::new();
    for t in 0..space.mesh().n_triangles() {
        space.element_values(t, &mut ev);
        let dofs = space.element_dofs(t);
        for q in 0..ev.jxw.len() {
            let mut u = Complex64::new(0.0, 0.0);
            let mut g = [Complex64::new(0.0, 0.0); 2];
            for i in 0..nloc {
                let ci = c[dofs[i]];
                u += ci * vals[q * nloc + i];
                g[0] += ci * ev.grads[q * nloc + i][0];
                g[1] += ci * ev.grads[q * nloc + i][1];
            }
            let x = ev.points[q];
            acc.add(ev.jxw[q], u, g, exact(x), exact_grad(x));
        }
    }
    acc.finish(k)
}

/// Largest `|u|` over the Lagrange nodes and volume quadrature points of
/// elements inside D. A lower bound of the true supremum.
pub fn linf_on_d(field: &FeField) -> f64 {
    let order = crate::space::volume_order(field.space().degree());
    linf_on_d_with_order(field, order).expect("volume order is supported")
}

/// As [`linf_on_d`] with sampling at the points of a rule of `order`.
pub fn linf_on_d_with_order(field: &FeField, order: usize) -> Result<f64> {
    let space = field.space();
    let mesh = space.mesh();
    let rule = triangle_quadrature(order)?;
    let basis = space.basis();
    let nloc = basis.len();
    let mut table = Vec::with_capacity((rule.len() + nloc) * nloc);
    for xi in rule.points.iter().chain(basis.nodes().iter()) {
        table.extend(basis.values(*xi));
    }
    let c = field.coeffs();
    let mut max = 0.0f64;
    for t in 0..mesh.n_triangles() {
        if mesh.region(t).chi() == 0.0 {
            continue;
        }
        let dofs = space.element_dofs(t);
        for row in table.chunks(nloc) {
            let u: Complex64 = dofs.iter().zip(row).map(|(&d, v)| c[d] * v).sum();
            max = max.max(u.norm());
        }
    }
    Ok(max)
}

/// `log(e_j / e_{j+1}) / log(h_j / h_{j+1})` for consecutive levels; `None`
/// where an error is zero or not finite.
pub fn fit_slopes(h: &[f64], e: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(h.len(), e.len(), "one error per mesh size");
    h.windows(2)
        .zip(e.windows(2))
        .map(|(h, e)| {
            let s = (e[0] / e[1]).ln() / (h[0] / h[1]).ln();
            (e[0] > 0.0 && e[1] > 0.0 && s.is_finite()).then_some(s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelError {
    pub level: usize,
    pub h: f64,
    pub ndofs: usize,
    pub abs_energy: f64,
    pub rel_energy: f64,
    pub abs_l2: f64,
    pub rel_l2: f64,
    pub linf_d: f64,
    /// Energy-error slope from the previous row to this one.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<LevelError>,
}

pub const ERROR_CSV_HEADER: &str = "level,h,ndofs,rel_energy_err,rel_l2_err,slope";

impl ErrorReport {
    pub fn push(&mut self, level: usize, h: f64, ndofs: usize, err: ErrorPair, linf_d: f64) {
        self.rows.push(LevelError {
            level,
            h,
            ndofs,
            abs_energy: err.abs_energy,
            rel_energy: err.rel_energy(),
            abs_l2: err.abs_l2,
            rel_l2: err.rel_l2(),
            linf_d,
            slope: None,
        });
    }

    /// Relative energy-error slopes between consecutive rows; the first
    /// row never has one.
    pub fn fit_rates(&mut self) -> Vec<Option<f64>> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let e: Vec<f64> = self.rows.iter().map(|r| r.rel_energy).collect();
        let slopes = if self.rows.len() >= 2 { fit_slopes(&h, &e) } else { Vec::new() };
        for (i, row) in self.rows.iter_mut().enumerate() {
            row.slope = if i == 0 { None } else { slopes[i - 1] };
        }
        slopes
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{ERROR_CSV_HEADER}")?;
        for r in &self.rows {
            let slope = r.slope.map(|s| format!("{s:.6}")).unwrap_or_default();
            writeln!(w, "{},{:.6e},{},{:.6e},{:.6e},{}", r.level, r.h, r.ndofs, r.rel_energy, r.rel_l2, slope)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }
}
