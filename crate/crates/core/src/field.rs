use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{FemError, Result};
use crate::mesh::Point;
use crate::space::FeSpace;

/// Coefficient vector of a finite element function.
#[derive(Debug, Clone)]
pub struct FeField {
    space: Arc<FeSpace>,
    coeffs: Vec<Complex64>,
}

impl FeField {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self {
            space: space.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); space.n_dofs()],
        }
    }

    pub fn from_coeffs(space: &Arc<FeSpace>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(FemError::Argument(format!("{} coefficients for {} dofs", coeffs.len(), space.n_dofs())));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FemError::Data("non-finite coefficient".into()));
        }
        Ok(Self {
            space: space.clone(),
            coeffs,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Value at reference point `xi` of triangle `t`.
    pub fn value_in(&self, t: usize, xi: Point) -> Complex64 {
        let vals = self.space.basis().values(xi);
        self.space.element_dofs(t).iter().zip(&vals).map(|(&d, v)| self.coeffs[d] * v).sum()
    }

    /// Value at physical point `x`.
    pub fn evaluate(&self, x: Point) -> Result<Complex64> {
        let (t, xi) = self.space.mesh().locate_point(x)?;
        Ok(self.value_in(t, xi))
    }
}

/// Nodal interpolant of `f`.
pub fn interpolate(space: &Arc<FeSpace>, f: impl Fn(Point) -> Complex64) -> Result<FeField> {
    let coeffs: Vec<Complex64> = space.dof_points().into_iter().map(f).collect();
    if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
        return Err(FemError::Data(format!("function is not finite at dof {i}")));
    }
    FeField::from_coeffs(space, coeffs)
}
