use num_complex::Complex64;

use crate::error::{FemError, Result};
use crate::mesh::Point;

pub const DEFAULT_TOL: f64 = 5e-7;
pub const DEFAULT_MAX_ITER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Coefficient `1 + eps chi |Phi|^2`, unchanged load.
    Frozen,
    /// Coefficient `1 + 2 eps chi |Phi|^2`, load corrected by `-k^2 eps (|Phi|^2 Phi, v)_D`.
    NewtonLike,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Frozen => "frozen",
            Scheme::NewtonLike => "newtonlike",
        }
    }

    /// Factor multiplying `eps chi |Phi|^2` in the linearized coefficient.
    pub fn weight_factor(self) -> f64 {
        match self {
            Scheme::Frozen => 1.0,
            Scheme::NewtonLike => 2.0,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frozen" => Ok(Scheme::Frozen),
            "newtonlike" | "newton-like" | "newton_like" => Ok(Scheme::NewtonLike),
            other => Err(FemError::Argument(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Constant(f64),
    /// `amplitude * exp(-1 / (1.2 - (|x - center| / radius)^2))` inside the
    /// ball of `radius` around `center`, zero outside.
    Bump { amplitude: f64, center: Point, radius: f64 },
    /// Source making `exp(i k d.x)` an exact solution of the nonlinear
    /// equation: `-k^2 eps chi_D exp(i k d.x)`.
    PlaneWave { direction: Point },
}

impl Source {
    /// Bump of amplitude 10^4 and radius 0.05 centred at (-0.55, 0).
    pub fn standard_bump() -> Self {
        Source::Bump {
            amplitude: 1e4,
            center: [-0.55, 0.0],
            radius: 0.05,
        }
    }

    pub fn value(&self, x: Point, chi: f64, k: f64, eps: f64) -> Complex64 {
        match *self {
            Source::Constant(c) => Complex64::new(c, 0.0),
            Source::Bump { amplitude, center, radius } => {
                let rho2 = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (radius * radius);
                if rho2 < 1.0 {
                    Complex64::new(amplitude * (-1.0 / (1.2 - rho2)).exp(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Source::PlaneWave { direction } => -k * k * eps * chi * plane_wave(direction, k, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryData {
    Zero,
    Constant(f64),
    /// Impedance trace `du/dn + i k u` of `exp(i k d.x)`.
    PlaneWaveImpedance { direction: Point },
}

impl BoundaryData {
    pub fn value(&self, x: Point, normal: Point, k: f64) -> Complex64 {
        match *self {
            BoundaryData::Zero => Complex64::new(0.0, 0.0),
            BoundaryData::Constant(c) => Complex64::new(c, 0.0),
            BoundaryData::PlaneWaveImpedance { direction } => {
                let dn = direction[0] * normal[0] + direction[1] * normal[1];
                Complex64::new(0.0, k * (1.0 + dn)) * plane_wave(direction, k, x)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BoundaryData::Zero) || matches!(self, BoundaryData::Constant(c) if *c == 0.0)
    }
}

/// `exp(i k d.x)`.
pub fn plane_wave(direction: Point, k: f64, x: Point) -> Complex64 {
    Complex64::from_polar(1.0, k * (direction[0] * x[0] + direction[1] * x[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub k: f64,
    pub epsilon: f64,
    pub source: Source,
    pub boundary: BoundaryData,
    pub scheme: Scheme,
    pub tol: f64,
    pub max_iter: usize,
}

impl ProblemSpec {
    /// Frozen scheme, zero data, default tolerance and iteration cap.
    pub fn new(k: f64, epsilon: f64) -> Self {
        Self {
            k,
            epsilon,
            source: Source::Constant(0.0),
            boundary: BoundaryData::Zero,
            scheme: Scheme::Frozen,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn with_boundary(mut self, boundary: BoundaryData) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// Linear plane-wave problem with exact solution `exp(i k d.x)`; with
    /// `epsilon > 0` the source compensates the nonlinear term.
    pub fn manufactured(k: f64, epsilon: f64, direction: Point) -> Self {
        Self::new(k, epsilon)
            .with_source(Source::PlaneWave { direction })
            .with_boundary(BoundaryData::PlaneWaveImpedance { direction })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FemError::Argument(m));
        if !(self.k.is_finite() && self.k >= 1.0) {
            return bad(format!("wave number must be >= 1, got {}", self.k));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        let unit = |d: Point| (d[0].hypot(d[1]) - 1.0).abs() <= 1e-12;
        match self.source {
            Source::Constant(c) if !c.is_finite() => return bad("source value must be finite".into()),
            Source::Bump { amplitude, center, radius }
                if !(amplitude.is_finite() && center.iter().all(|c| c.is_finite()) && radius > 0.0 && radius.is_finite()) =>
            {
                return bad("bump needs finite amplitude and center and a positive radius".into())
            }
            Source::PlaneWave { direction } if !unit(direction) => return bad("plane-wave direction must be a unit vector".into()),
            _ => {}
        }
        match self.boundary {
            BoundaryData::Constant(c) if !c.is_finite() => bad("boundary value must be finite".into()),
            BoundaryData::PlaneWaveImpedance { direction } if !unit(direction) => {
                bad("plane-wave direction must be a unit vector".into())
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_profile() {
        let s = Source::standard_bump();
        let peak = s.value([-0.55, 0.0], 0.0, 8.0, 0.1).re;
        assert!((peak - 1e4 * (-1.0f64 / 1.2).exp()).abs() < 1e-9);
        assert_eq!(s.value([-0.55, 0.05], 0.0, 8.0, 0.1).re, 0.0);
        assert_eq!(s.value([0.0, 0.0], 1.0, 8.0, 0.1).re, 0.0);
    }

    #[test]
    fn impedance_trace_of_plane_wave() {
        // At x = (1, 0) with d = n = (1, 0): g = 2 i k exp(i k).
        let k = 8.0;
        let g = BoundaryData::PlaneWaveImpedance { direction: [1.0, 0.0] }.value([1.0, 0.0], [1.0, 0.0], k);
        let want = Complex64::new(0.0, 2.0 * k) * Complex64::from_polar(1.0, k);
        assert!((g - want).norm() < 1e-13);
    }

    #[test]
    fn validation() {
        assert!(ProblemSpec::new(8.0, 0.1).validate().is_ok());
        assert!(ProblemSpec::new(0.5, 0.1).validate().is_err());
        assert!(ProblemSpec::new(8.0, -0.1).validate().is_err());
        assert!(ProblemSpec::new(8.0, 0.1).with_tol(0.0).validate().is_err());
        assert!(ProblemSpec::new(8.0, 0.1).with_max_iter(0).validate().is_err());
        assert!(ProblemSpec::manufactured(8.0, 0.0, [2.0, 0.0]).validate().is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("Frozen".parse::<Scheme>().unwrap(), Scheme::Frozen);
        assert_eq!("newton-like".parse::<Scheme>().unwrap(), Scheme::NewtonLike);
        assert!("picard".parse::<Scheme>().is_err());
    }
}
