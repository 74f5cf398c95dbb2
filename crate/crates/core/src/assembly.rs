//! Matrices and vectors of the linearized problems.
//!
//! Basis functions are real, so every matrix here is complex symmetric:
//! `M = S - k^2 W + i k B` with `S`, `W`, `B` real symmetric. Test functions
//! enter unconjugated, and `(w, v)` means `int w v`.

use std::io::Write;
use std::sync::Arc;

use nlhelm_sparse::SparseMatrixC;
use num_complex::Complex64;

use crate::error::{FemError, Result};
use crate::field::FeField;
use crate::problem::{BoundaryData, ProblemSpec, Scheme};
use crate::space::{ElementValues, FaceValues, FeSpace};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Real symmetric building blocks.
#[derive(Debug, Clone)]
pub struct Operators {
    pub stiffness: SparseMatrixC,
    pub mass: SparseMatrixC,
    pub boundary_mass: SparseMatrixC,
}

/// Linear system of one fixed-point step.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub matrix: SparseMatrixC,
    pub load: Vec<Complex64>,
    pub scheme: Scheme,
    /// Coefficients of the field the system was linearized around.
    pub linearized_at: Vec<Complex64>,
}

impl LinearizedSystem {
    pub fn write_matrix_market<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.matrix.write_matrix_market(out)
    }

    /// Load vector as a Matrix Market complex array.
    pub fn write_load_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix array complex general")?;
        writeln!(out, "{} 1", self.load.len())?;
        for v in &self.load {
            writeln!(out, "{:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Coefficient `1 + factor * chi_D * |phi|^2` of the weighted mass term.
#[derive(Clone, Copy)]
struct Weight<'a> {
    factor: f64,
    phi: Option<&'a [Complex64]>,
}

impl Weight<'_> {
    const ONE: Weight<'static> = Weight { factor: 0.0, phi: None };
}

fn check_field(space: &Arc<FeSpace>, field: &FeField) -> Result<()> {
    if !Arc::ptr_eq(space, field.space()) {
        return Err(FemError::Argument("field does not live on the given space".into()));
    }
    if field.coeffs().iter().any(|c| !c.is_finite()) {
        return Err(FemError::Data("field has non-finite coefficients".into()));
    }
    Ok(())
}

/// Values of a field at the volume quadrature points of element `t`.
fn values_at_points(space: &FeSpace, t: usize, coeffs: &[Complex64], out: &mut Vec<Complex64>) {
    let nloc = space.n_local();
    let vals = space.volume_values();
    let dofs = space.element_dofs(t);
    out.clear();
    for q in 0..space.volume_rule().len() {
        let v = &vals[q * nloc..(q + 1) * nloc];
        out.push(dofs.iter().zip(v).map(|(&d, b)| coeffs[d] * b).sum());
    }
}

/// `stiff * S + mass * W + boundary * B`.
fn assemble_matrix(space: &FeSpace, stiff: f64, mass: Complex64, weight: Weight, boundary: Complex64) -> SparseMatrixC {
    let mesh = space.mesh();
    let nloc = space.n_local();
    let nq = space.volume_rule().len();
    let vals = space.volume_values();
    let slots = space.element_slots();
    let mut m = SparseMatrixC::zeros(space.pattern().clone());
    let values = m.values_mut();
    let mut ev = ElementValues::default();
    let mut phi_q = Vec::new();
    let mut wq = vec![0.0; nq];
    let mut a = vec![0.0; nloc * nloc];
    let mut b = vec![0.0; nloc * nloc];
    for t in 0..mesh.n_triangles() {
        space.element_values(t, &mut ev);
        let chi = mesh.region(t).chi();
        match weight.phi {
            Some(phi) if weight.factor * chi != 0.0 => {
                values_at_points(space, t, phi, &mut phi_q);
                for q in 0..nq {
                    wq[q] = ev.jxw[q] * (1.0 + weight.factor * chi * phi_q[q].norm_sqr());
                }
            }
            _ => wq.copy_from_slice(&ev.jxw),
        }
        a.iter_mut().for_each(|v| *v = 0.0);
        b.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..nq {
            let g = &ev.grads[q * nloc..(q + 1) * nloc];
            let v = &vals[q * nloc..(q + 1) * nloc];
            let (jw, w) = (ev.jxw[q], wq[q]);
            for i in 0..nloc {
                let (gi, vi) = (g[i], v[i] * w);
                let gi = [gi[0] * jw, gi[1] * jw];
                for j in i..nloc {
                    a[i * nloc + j] += gi[0] * g[j][0] + gi[1] * g[j][1];
                    b[i * nloc + j] += vi * v[j];
                }
            }
        }
        let sl = &slots[t * nloc * nloc..(t + 1) * nloc * nloc];
        for i in 0..nloc {
            for j in i..nloc {
                let val = stiff * a[i * nloc + j] + mass * b[i * nloc + j];
                values[sl[i * nloc + j] as usize] += val;
                if j != i {
                    values[sl[j * nloc + i] as usize] += val;
                }
            }
        }
    }
    if boundary != ZERO {
        let mut fv = FaceValues::default();
        for &(t, le) in space.boundary_faces() {
            space.face_values(t, le, &mut fv);
            let sl = &slots[t * nloc * nloc..(t + 1) * nloc * nloc];
            for (q, jw) in fv.jxw.iter().enumerate() {
                let v = &fv.vals[q * nloc..(q + 1) * nloc];
                for i in 0..nloc {
                    if v[i] == 0.0 {
                        continue;
                    }
                    for j in 0..nloc {
                        values[sl[i * nloc + j] as usize] += boundary * (jw * v[i] * v[j]);
                    }
                }
            }
        }
    }
    m
}

/// Stiffness, plain mass and boundary mass matrices.
pub fn assemble_operators(space: &FeSpace) -> Operators {
    let one = Complex64::new(1.0, 0.0);
    Operators {
        stiffness: assemble_matrix(space, 1.0, ZERO, Weight::ONE, ZERO),
        mass: assemble_matrix(space, 0.0, one, Weight::ONE, ZERO),
        boundary_mass: assemble_matrix(space, 0.0, ZERO, Weight::ONE, one),
    }
}

/// Mass matrix with weight `1 + factor * chi_D * |phi|^2`.
pub fn assemble_weighted_mass(space: &Arc<FeSpace>, phi: &FeField, factor: f64) -> Result<SparseMatrixC> {
    check_field(space, phi)?;
    Ok(assemble_matrix(
        space,
        0.0,
        Complex64::new(1.0, 0.0),
        Weight { factor, phi: Some(phi.coeffs()) },
        ZERO,
    ))
}

/// `(g, phi_i)` over the outer boundary.
pub fn boundary_load(space: &FeSpace, g: &BoundaryData, k: f64) -> Vec<Complex64> {
    let mut out = vec![ZERO; space.n_dofs()];
    if matches!(g, BoundaryData::Zero) {
        return out;
    }
    let nloc = space.n_local();
    let mut fv = FaceValues::default();
    for &(t, le) in space.boundary_faces() {
        space.face_values(t, le, &mut fv);
        let dofs = space.element_dofs(t);
        for q in 0..fv.jxw.len() {
            let gq = g.value(fv.points[q], fv.normals[q], k) * fv.jxw[q];
            for (i, &d) in dofs.iter().enumerate() {
                out[d] += gq * fv.vals[q * nloc + i];
            }
        }
    }
    out
}

/// `(f, phi_i) + (g, phi_i)_Gamma`.
pub fn assemble_load(space: &FeSpace, spec: &ProblemSpec) -> Vec<Complex64> {
    let mut out = boundary_load(space, &spec.boundary, spec.k);
    let mesh = space.mesh();
    let nloc = space.n_local();
    let vals = space.volume_values();
    let mut ev = ElementValues::default();
    for t in 0..mesh.n_triangles() {
        space.element_values(t, &mut ev);
        let chi = mesh.region(t).chi();
        let dofs = space.element_dofs(t);
        for q in 0..ev.jxw.len() {
            let fq = spec.source.value(ev.points[q], chi, spec.k, spec.epsilon);
            if fq == ZERO {
                continue;
            }
            let fq = fq * ev.jxw[q];
            for (i, &d) in dofs.iter().enumerate() {
                out[d] += fq * vals[q * nloc + i];
            }
        }
    }
    out
}

/// `-k^2 eps (|phi|^2 phi, phi_i)_D`, added to the load of the Newton-like scheme.
fn cubic_correction(space: &FeSpace, spec: &ProblemSpec, phi: &[Complex64], out: &mut [Complex64]) {
    let mesh = space.mesh();
    let nloc = space.n_local();
    let vals = space.volume_values();
    let mut ev = ElementValues::default();
    let mut phi_q = Vec::new();
    let c = -spec.k * spec.k * spec.epsilon;
    for t in 0..mesh.n_triangles() {
        if mesh.region(t).chi() == 0.0 {
            continue;
        }
        space.element_values(t, &mut ev);
        values_at_points(space, t, phi, &mut phi_q);
        let dofs = space.element_dofs(t);
        for q in 0..ev.jxw.len() {
            let term = phi_q[q] * (c * phi_q[q].norm_sqr() * ev.jxw[q]);
            for (i, &d) in dofs.iter().enumerate() {
                out[d] += term * vals[q * nloc + i];
            }
        }
    }
}

/// Matrix and load of one fixed-point step around `phi`.
pub fn assemble_linearized(space: &Arc<FeSpace>, spec: &ProblemSpec, phi: &FeField) -> Result<LinearizedSystem> {
    let load = assemble_load(space, spec);
    linearized_with_load(space, spec, phi, load)
}

/// As [`assemble_linearized`] with a precomputed `(f, v) + (g, v)_Gamma`.
pub(crate) fn linearized_with_load(
    space: &Arc<FeSpace>,
    spec: &ProblemSpec,
    phi: &FeField,
    mut load: Vec<Complex64>,
) -> Result<LinearizedSystem> {
    spec.validate()?;
    check_field(space, phi)?;
    let k = spec.k;
    let matrix = assemble_matrix(
        space,
        1.0,
        Complex64::new(-k * k, 0.0),
        Weight {
            factor: spec.scheme.weight_factor() * spec.epsilon,
            phi: Some(phi.coeffs()),
        },
        Complex64::new(0.0, k),
    );
    if spec.scheme == Scheme::NewtonLike && spec.epsilon != 0.0 {
        cubic_correction(space, spec, phi.coeffs(), &mut load);
    }
    Ok(LinearizedSystem {
        matrix,
        load,
        scheme: spec.scheme,
        linearized_at: phi.coeffs().to_vec(),
    })
}

/// True nonlinear residual `(f, v) + (g, v)_Gamma - B(u, v)` for every basis function.
pub fn assemble_nonlinear_residual(space: &Arc<FeSpace>, spec: &ProblemSpec, u: &FeField) -> Result<Vec<Complex64>> {
    let load = assemble_load(space, spec);
    residual_with_load(space, spec, u, load)
}

pub(crate) fn residual_with_load(
    space: &Arc<FeSpace>,
    spec: &ProblemSpec,
    u: &FeField,
    mut r: Vec<Complex64>,
) -> Result<Vec<Complex64>> {
    spec.validate()?;
    check_field(space, u)?;
    let mesh = space.mesh();
    let nloc = space.n_local();
    let vals = space.volume_values();
    let c = u.coeffs();
    let k2 = spec.k * spec.k;
    let mut ev = ElementValues::default();
    for t in 0..mesh.n_triangles() {
        space.element_values(t, &mut ev);
        let chi = mesh.region(t).chi();
        let dofs = space.element_dofs(t);
        for q in 0..ev.jxw.len() {
            let v = &vals[q * nloc..(q + 1) * nloc];
            let g = &ev.grads[q * nloc..(q + 1) * nloc];
            let mut uq = ZERO;
            let mut gu = [ZERO; 2];
            for i in 0..nloc {
                let ci = c[dofs[i]];
                uq += ci * v[i];
                gu[0] += ci * g[i][0];
                gu[1] += ci * g[i][1];
            }
            let jw = ev.jxw[q];
            let mass = uq * (k2 * (1.0 + spec.epsilon * chi * uq.norm_sqr()) * jw);
            let gu = [gu[0] * jw, gu[1] * jw];
            for i in 0..nloc {
                r[dofs[i]] += mass * v[i] - gu[0] * g[i][0] - gu[1] * g[i][1];
            }
        }
    }
    let ik = Complex64::new(0.0, spec.k);
    let mut fv = FaceValues::default();
    for &(t, le) in space.boundary_faces() {
        space.face_values(t, le, &mut fv);
        let dofs = space.element_dofs(t);
        for q in 0..fv.jxw.len() {
            let v = &fv.vals[q * nloc..(q + 1) * nloc];
            let uq: Complex64 = dofs.iter().zip(v).map(|(&d, b)| c[d] * b).sum();
            let term = ik * uq * fv.jxw[q];
            for i in 0..nloc {
                r[dofs[i]] -= term * v[i];
            }
        }
    }
    Ok(r)
}
