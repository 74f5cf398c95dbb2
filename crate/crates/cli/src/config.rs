//! Run configuration: a TOML document with four sections.
//!
//! ```toml
//! [problem]
//! k = [8.0, 16.0]          # wave numbers; a scalar is a one-element list
//! epsilon = 0.01           # Kerr coefficients
//! source = "bump"          # "bump" | "constant" | "plane-wave"
//! f = 50.0                 # constant source values (source = "constant")
//! g = 0.0                  # constant impedance data (bump and constant sources)
//! direction = [0.6, 0.8]   # plane-wave direction (source = "plane-wave")
//!
//! [discretization]
//! p = [1, 2, 3]            # polynomial degrees, 1..=4
//! levels = [2, 3, 4, 5]    # refinement counts of the base mesh
//! geometric_degree = 2     # optional; defaults to p
//! reference_level = 6      # convergence reference
//! reference_p = 3
//!
//! [solver]
//! scheme = ["frozen"]      # "frozen" | "newtonlike"
//! tol = 5e-7
//! max_iter = 50
//!
//! [output]
//! directory = "out"
//! emit_svg = true
//! error_target = 0.06      # accuracy level of the DOF table
//! ```
//!
//! Every key is optional; unknown keys are rejected. A `[run]` table is
//! accepted and ignored so that written manifests can be fed back in.

use std::path::PathBuf;

use nlhelm_core::{BoundaryData, ProblemSpec, Scheme, Source};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub discretization: DiscretizationConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    #[serde(skip_serializing)]
    pub run: Option<toml::Table>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Bump,
    Constant,
    PlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub k: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub epsilon: Vec<f64>,
    pub source: SourceKind,
    #[serde(deserialize_with = "one_or_many")]
    pub f: Vec<f64>,
    pub g: f64,
    pub direction: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub p: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub levels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometric_degree: Option<usize>,
    pub reference_level: usize,
    pub reference_p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    #[serde(deserialize_with = "schemes")]
    pub scheme: Vec<String>,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub emit_svg: bool,
    pub error_target: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            k: vec![8.0],
            epsilon: vec![0.01],
            source: SourceKind::Bump,
            f: vec![50.0],
            g: 0.0,
            direction: [0.6, 0.8],
        }
    }
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            p: vec![2],
            levels: vec![2, 3, 4, 5],
            geometric_degree: None,
            reference_level: 6,
            reference_p: 3,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { scheme: vec!["frozen".into()], tol: 5e-7, max_iter: 50 }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), emit_svg: true, error_target: 0.06 }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            discretization: DiscretizationConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            run: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => Ok(vec![v]),
        OneOrMany::Many(v) => Ok(v),
    }
}

fn schemes<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    let names: Vec<String> = one_or_many(d)?;
    for n in &names {
        n.parse::<Scheme>().map_err(de::Error::custom)?;
    }
    Ok(names)
}

/// One solver run of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub k: f64,
    pub epsilon: f64,
    pub f: f64,
    pub p: usize,
    pub level: usize,
    pub scheme: Scheme,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        self.solver.scheme.iter().map(|s| s.parse().expect("validated")).collect()
    }

    pub fn geometric_degree(&self, p: usize) -> usize {
        self.discretization.geometric_degree.unwrap_or(p)
    }

    /// Source values to sweep: the `f` list for constant sources, a single
    /// placeholder otherwise.
    pub fn source_values(&self) -> Vec<f64> {
        match self.problem.source {
            SourceKind::Constant => self.problem.f.clone(),
            _ => vec![0.0],
        }
    }

    pub fn spec(&self, case: &Case) -> ProblemSpec {
        let pc = &self.problem;
        let boundary = if pc.g == 0.0 { BoundaryData::Zero } else { BoundaryData::Constant(pc.g) };
        let spec = match pc.source {
            SourceKind::Bump => ProblemSpec::new(case.k, case.epsilon).with_source(Source::standard_bump()).with_boundary(boundary),
            SourceKind::Constant => {
                ProblemSpec::new(case.k, case.epsilon).with_source(Source::Constant(case.f)).with_boundary(boundary)
            }
            SourceKind::PlaneWave => ProblemSpec::manufactured(case.k, case.epsilon, pc.direction),
        };
        spec.with_scheme(case.scheme).with_tol(self.solver.tol).with_max_iter(self.solver.max_iter)
    }

    /// Cartesian product of the sweep lists, in list order.
    pub fn cases(&self) -> Vec<Case> {
        let mut out = Vec::new();
        for &k in &self.problem.k {
            for &epsilon in &self.problem.epsilon {
                for f in self.source_values() {
                    for &p in &self.discretization.p {
                        for &level in &self.discretization.levels {
                            for scheme in self.schemes() {
                                out.push(Case { k, epsilon, f, p, level, scheme });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let (pc, dc, sc) = (&self.problem, &self.discretization, &self.solver);
        let lists: [(&str, usize); 6] = [
            ("problem.k", pc.k.len()),
            ("problem.epsilon", pc.epsilon.len()),
            ("problem.f", pc.f.len()),
            ("discretization.p", dc.p.len()),
            ("discretization.levels", dc.levels.len()),
            ("solver.scheme", sc.scheme.len()),
        ];
        for (name, len) in lists {
            if len == 0 {
                return bad(format!("{name} must not be empty"));
            }
        }
        if let Some(k) = pc.k.iter().find(|k| !(k.is_finite() && **k >= 1.0)) {
            return bad(format!("problem.k: wave number {k} must be >= 1"));
        }
        if let Some(e) = pc.epsilon.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return bad(format!("problem.epsilon: {e} must be >= 0"));
        }
        if pc.f.iter().any(|f| !f.is_finite()) || !pc.g.is_finite() {
            return bad("problem.f and problem.g must be finite".into());
        }
        if pc.source == SourceKind::PlaneWave {
            if pc.g != 0.0 {
                return bad("problem.g must be 0 with a plane-wave source; its impedance data is implied".into());
            }
            if (pc.direction[0].hypot(pc.direction[1]) - 1.0).abs() > 1e-12 {
                return bad("problem.direction must be a unit vector".into());
            }
        }
        let degree_ok = |p: usize| (1..=MAX_DEGREE).contains(&p);
        if let Some(p) = dc.p.iter().find(|p| !degree_ok(**p)) {
            return bad(format!("discretization.p: degree {p} outside 1..={MAX_DEGREE}"));
        }
        if !degree_ok(dc.reference_p) {
            return bad(format!("discretization.reference_p: degree {} outside 1..={MAX_DEGREE}", dc.reference_p));
        }
        if let Some(q) = dc.geometric_degree {
            if !degree_ok(q) {
                return bad(format!("discretization.geometric_degree: {q} outside 1..={MAX_DEGREE}"));
            }
        }
        if dc.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("discretization.levels must be strictly increasing".into());
        }
        if !(sc.tol.is_finite() && sc.tol > 0.0) {
            return bad(format!("solver.tol: {} must be positive", sc.tol));
        }
        if sc.max_iter == 0 {
            return bad("solver.max_iter must be at least 1".into());
        }
        if !(self.output.error_target > 0.0) {
            return bad("output.error_target must be positive".into());
        }
        Ok(())
    }

    /// Checks needed by the convergence study only.
    pub fn validate_convergence(&self) -> Result<(), CliError> {
        let dc = &self.discretization;
        let finest = *dc.levels.last().expect("validated non-empty");
        if dc.reference_level <= finest {
            return Err(CliError::Config(format!(
                "discretization.reference_level {} must be finer than every study level (finest {finest})",
                dc.reference_level
            )));
        }
        Ok(())
    }
}

pub const PRESETS: [(&str, &str); 5] = [
    ("convergence", include_str!("../presets/convergence.toml")),
    ("iterations-k", include_str!("../presets/iterations-k.toml")),
    ("iterations-hp", include_str!("../presets/iterations-hp.toml")),
    ("contraction-f", include_str!("../presets/contraction-f.toml")),
    ("contraction-eps", include_str!("../presets/contraction-eps.toml")),
];

pub fn preset(name: &str) -> Result<&'static str, CliError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!("unknown preset '{name}'; available: {}", names.join(", ")))
    })
}
