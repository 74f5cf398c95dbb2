//! Fixed-point iterations for the discrete nonlinear problem.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nlhelm_sparse::{Factorizer, SparseError};
use num_complex::Complex64;

use crate::assembly::{assemble_load, linearized_with_load, residual_with_load};
use crate::diagnostics::EnergyNorm;
use crate::error::FemError;
use crate::field::FeField;
use crate::problem::ProblemSpec;
use crate::space::{ElementValues, FaceValues, FeSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Converged { iterations: usize },
    MaxIterReached { residual: f64 },
    Diverged { iteration: usize },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Converged { .. } => "CONVERGED",
            Outcome::MaxIterReached { .. } => "MAX_ITER_REACHED",
            Outcome::Diverged { .. } => "DIVERGED",
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, Outcome::Converged { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub rel_residual: f64,
    /// `||u^(l) - u^(l-1)||_{1,k}`.
    pub increment_energy: f64,
    /// Ratio of this increment to the previous one, from the second step on.
    pub sigma: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub outcome: Outcome,
}

pub const TRACE_CSV_HEADER: &str = "iter,rel_residual,increment_energy,sigma,wall_ms";

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.rel_residual)
    }

    /// Mean of the recorded contraction factors, if any.
    pub fn average_sigma(&self) -> Option<f64> {
        let s: Vec<f64> = self.records.iter().filter_map(|r| r.sigma).filter(|s| s.is_finite()).collect();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }

    /// Writes the trace; with `with_time == false` the wall-time column is
    /// left empty so that repeated runs produce identical files.
    pub fn write_csv<W: Write>(&self, mut w: W, with_time: bool) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            let sigma = r.sigma.map(|s| format!("{s:.10e}")).unwrap_or_default();
            let time = if with_time { format!("{:.3}", r.wall_ms) } else { String::new() };
            writeln!(w, "{},{:.10e},{:.10e},{},{}", r.iter, r.rel_residual, r.increment_energy, sigma, time)?;
        }
        Ok(())
    }
}

/// Mesh-resolution indicators reported when a linear system is singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionIndicators {
    pub k: f64,
    pub h: f64,
    pub p: usize,
    /// `k (kh)^(p+1)`.
    pub k_kh_p1: f64,
    /// `k (kh)^(2p)`.
    pub k_kh_2p: f64,
}

impl ResolutionIndicators {
    pub fn new(k: f64, h: f64, p: usize) -> Self {
        let kh = k * h;
        Self {
            k,
            h,
            p,
            k_kh_p1: k * kh.powi(p as i32 + 1),
            k_kh_2p: k * kh.powi(2 * p as i32),
        }
    }
}

impl std::fmt::Display for ResolutionIndicators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "k = {}, h = {:.4e}, p = {}: k(kh)^(p+1) = {:.3e}, k(kh)^(2p) = {:.3e}",
            self.k, self.h, self.p, self.k_kh_p1, self.k_kh_2p
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("linear system of iteration {iteration} is singular ({detail}); the mesh may violate the resolution condition: {indicators}")]
    Singular {
        iteration: usize,
        detail: String,
        indicators: ResolutionIndicators,
    },
}

/// Nominal mesh size `2^-level` of the refinement hierarchy.
pub fn nominal_h(space: &FeSpace) -> f64 {
    0.5f64.powi(space.mesh().level() as i32)
}

/// Runs the configured scheme from `u = 0`.
pub fn solve_nonlinear(space: &Arc<FeSpace>, spec: &ProblemSpec) -> Result<(FeField, IterationTrace), SolverError> {
    solve_nonlinear_from(space, spec, FeField::zeros(space))
}

/// Runs the configured scheme from `initial`.
pub fn solve_nonlinear_from(
    space: &Arc<FeSpace>,
    spec: &ProblemSpec,
    initial: FeField,
) -> Result<(FeField, IterationTrace), SolverError> {
    spec.validate()?;
    if !Arc::ptr_eq(space, initial.space()) {
        return Err(FemError::Argument("initial guess does not live on the given space".into()).into());
    }
    let energy = EnergyNorm::new(space);
    let load = assemble_load(space, spec);
    let load_norm = norm(&load);
    let denom = if load_norm > 0.0 { load_norm } else { 1.0 };
    let mut factorizer = Factorizer::new();
    let mut u = initial;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut outcome = None;
    for l in 1..=spec.max_iter {
        let start = Instant::now();
        let sys = linearized_with_load(space, spec, &u, load.clone())?;
        let fact = factorizer.factorize(&sys.matrix).map_err(|e| match e {
            SparseError::Singular { detail } => SolverError::Singular {
                iteration: l,
                detail,
                indicators: ResolutionIndicators::new(spec.k, nominal_h(space), space.degree()),
            },
            other => SolverError::Fem(other.into()),
        })?;
        let next = fact.solve(&sys.load).map_err(FemError::from)?;
        drop(fact);
        if next.iter().any(|c| !c.is_finite()) {
            records.push(IterationRecord {
                iter: l,
                rel_residual: f64::NAN,
                increment_energy: f64::NAN,
                sigma: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            outcome = Some(Outcome::Diverged { iteration: l });
            break;
        }
        let diff: Vec<Complex64> = next.iter().zip(u.coeffs()).map(|(a, b)| a - b).collect();
        let inc = energy.norm(&diff, spec.k);
        u.coeffs_mut().copy_from_slice(&next);
        let r = residual_with_load(space, spec, &u, load.clone())?;
        let rel = norm(&r) / denom;
        let sigma = records.last().and_then(|p| (p.increment_energy > 0.0).then(|| inc / p.increment_energy));
        records.push(IterationRecord {
            iter: l,
            rel_residual: rel,
            increment_energy: inc,
            sigma,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if !rel.is_finite() {
            outcome = Some(Outcome::Diverged { iteration: l });
            break;
        }
        if rel <= spec.tol {
            outcome = Some(Outcome::Converged { iterations: l });
            break;
        }
    }
    let outcome = outcome.unwrap_or(Outcome::MaxIterReached {
        residual: records.last().map_or(f64::NAN, |r| r.rel_residual),
    });
    Ok((u, IterationTrace { records, outcome }))
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Data-size and resolution quantities of a configuration. Informational.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallnessReport {
    /// `||f||_0 + ||g||_{L2(Gamma)}`.
    pub c_data: f64,
    /// `eps k^(d-2) C_data^2` with `d = 2`.
    pub eps_data: f64,
    /// `|ln h|^(2 pbar) eps k^(d-2) C_data^2`, `pbar = 1` for `p = 1`, else 0.
    pub log_weighted: f64,
    pub resolution: ResolutionIndicators,
    /// Largest element diameter of the mesh.
    pub mesh_h: f64,
}

/// Smallness quantities of `spec` on `space`; `h` is the nominal size
/// `2^-level`.
pub fn smallness_diagnostics(spec: &ProblemSpec, space: &FeSpace) -> SmallnessReport {
    let mesh = space.mesh();
    let (k, eps) = (spec.k, spec.epsilon);
    let mut ev = ElementValues::default();
    let mut f2 = 0.0;
    for t in 0..mesh.n_triangles() {
        space.element_values(t, &mut ev);
        let chi = mesh.region(t).chi();
        for (x, w) in ev.points.iter().zip(&ev.jxw) {
            f2 += w * spec.source.value(*x, chi, k, eps).norm_sqr();
        }
    }
    let mut g2 = 0.0;
    let mut fv = FaceValues::default();
    for &(t, le) in space.boundary_faces() {
        space.face_values(t, le, &mut fv);
        for q in 0..fv.jxw.len() {
            g2 += fv.jxw[q] * spec.boundary.value(fv.points[q], fv.normals[q], k).norm_sqr();
        }
    }
    let c_data = f2.sqrt() + g2.sqrt();
    let h = nominal_h(space);
    let p = space.degree();
    let eps_data = eps * c_data * c_data;
    let pbar = if p == 1 { 1 } else { 0 };
    SmallnessReport {
        c_data,
        eps_data,
        log_weighted: h.ln().abs().powi(2 * pbar) * eps_data,
        resolution: ResolutionIndicators::new(k, h, p),
        mesh_h: mesh.h(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_arithmetic() {
        let r = ResolutionIndicators::new(8.0, 1.0 / 16.0, 2);
        assert!((r.k_kh_2p - 0.5).abs() < 1e-15);
        assert!((r.k_kh_p1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trace_csv_and_sigma_average() {
        let rec = |iter, inc: f64, sigma| IterationRecord {
            iter,
            rel_residual: 0.1,
            increment_energy: inc,
            sigma,
            wall_ms: 1.5,
        };
        let t = IterationTrace {
            records: vec![rec(1, 4.0, None), rec(2, 2.0, Some(0.5)), rec(3, 0.5, Some(0.25))],
            outcome: Outcome::MaxIterReached { residual: 0.1 },
        };
        assert_eq!(t.average_sigma(), Some(0.375));
        let mut buf = Vec::new();
        t.write_csv(&mut buf, false).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], TRACE_CSV_HEADER);
        assert_eq!(lines[1], "1,1.0000000000e-1,4.0000000000e0,,");
        assert!(lines[2].starts_with("2,") && lines[2].contains(",5.0000000000e-1,"));
    }
}
