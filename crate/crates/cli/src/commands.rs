//! The experiment subcommands. Each runs its sweep, writes its files into
//! the configured output directory and returns the rows it wrote.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use nlhelm_core::diagnostics::{linf_on_d, ErrorReport};
use nlhelm_core::{
    error_vs_reference, solve_nonlinear, FeField, FeSpace, IterationTrace, Outcome, ProblemSpec,
};

use crate::config::{Case, RunConfig};
use crate::output::{tag, write_atomic, write_manifest, RunInfo};
use crate::svg::{Plot, Scale, Series};
use crate::sweep::{parallel_map, SpaceCache};
use crate::CliError;

pub const ITERATIONS_CSV_HEADER: &str = "k,h_level,p,scheme,iters,final_residual,outcome";
pub const OUTCOMES_CSV_HEADER: &str = "k,epsilon,p,level,scheme,iters,final_residual,outcome";
pub const DOFS_CSV_HEADER: &str = "k,epsilon,p,level,ndofs,rel_energy_err";
pub const DOF_TARGET_CSV_HEADER: &str = "k,epsilon,p,target,min_ndofs";
pub const CONTRACTION_CSV_HEADER: &str = "scheme,k,epsilon,f,p,h_level,avg_sigma,iters,final_residual,outcome";
pub const MESH_INFO_CSV_HEADER: &str = "level,geometric_degree,vertices,triangles,edges,curved,h,area";

type Solved = Arc<(FeField, IterationTrace)>;

/// Reference solutions by problem and discretization; lets several
/// convergence runs share their expensive reference solves.
#[derive(Default)]
pub struct ReferenceCache {
    solutions: Mutex<HashMap<String, Solved>>,
}

impl ReferenceCache {
    fn get_or_solve(&self, space: &Arc<FeSpace>, spec: &ProblemSpec) -> Result<Solved, CliError> {
        let key = format!("{spec:?}|{}|{}|{}", space.mesh().level(), space.mesh().geometric_degree(), space.degree());
        if let Some(s) = self.solutions.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let solved = Arc::new(solve_nonlinear(space, spec)?);
        self.solutions.lock().unwrap().insert(key, solved.clone());
        Ok(solved)
    }
}

fn fmt_outcome(case: &Case, trace: &IterationTrace) -> String {
    format!(
        "k={} epsilon={} f={} p={} level={} scheme={}: {} after {} iterations, residual {:.3e}",
        case.k,
        case.epsilon,
        case.f,
        case.p,
        case.level,
        case.scheme.name(),
        trace.outcome.label(),
        trace.iterations(),
        trace.final_residual()
    )
}

fn write_svg(cfg: &RunConfig, name: &str, plot: &Plot) -> Result<(), CliError> {
    if cfg.output.emit_svg {
        write_atomic(&cfg.output.directory, name, plot.to_svg().as_bytes())?;
    }
    Ok(())
}

fn single<T: Copy>(name: &str, values: &[T]) -> Result<T, CliError> {
    match values {
        [v] => Ok(*v),
        _ => Err(CliError::Config(format!("{name} must hold exactly one value for this command, got {}", values.len()))),
    }
}

/// Errors of one degree of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceSeries {
    pub k: f64,
    pub epsilon: f64,
    pub p: usize,
    pub report: ErrorReport,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceResult {
    pub series: Vec<ConvergenceSeries>,
    pub files: Vec<PathBuf>,
}

struct LevelRun {
    level: usize,
    ndofs: usize,
    trace: IterationTrace,
    err: nlhelm_core::ErrorPair,
    linf: f64,
}

/// Energy-error study against a finer reference solution; writes one
/// error CSV per (k, epsilon, p), the solver outcomes, the DOF table and
/// log-log plots.
pub fn convergence(cfg: &RunConfig, threads: usize, refs: &ReferenceCache) -> Result<ConvergenceResult, CliError> {
    cfg.validate_convergence()?;
    let scheme = cfg.schemes()[0];
    let f = single("problem.f", &cfg.source_values())?;
    let dc = &cfg.discretization;
    let cache = SpaceCache::default();
    let mut info = RunInfo::new("convergence");
    let mut files = Vec::new();
    let mut series = Vec::new();
    let mut outcomes_csv = format!("{OUTCOMES_CSV_HEADER}\n");
    let mut dofs_csv = format!("{DOFS_CSV_HEADER}\n");
    let mut target_csv = format!("{DOF_TARGET_CSV_HEADER}\n");
    let dir = &cfg.output.directory;
    let mut failed_reference = None;

    for &k in &cfg.problem.k {
        for &epsilon in &cfg.problem.epsilon {
            let ref_case = Case { k, epsilon, f, p: dc.reference_p, level: dc.reference_level, scheme };
            let rspace = cache.space(dc.reference_level, dc.reference_p, dc.reference_p)?;
            info.add_mesh(rspace.mesh());
            let reference = refs.get_or_solve(&rspace, &cfg.spec(&ref_case))?;
            let _ = writeln!(
                outcomes_csv,
                "{k},{epsilon},{},{},{},{},{:.6e},{}",
                dc.reference_p,
                dc.reference_level,
                scheme.name(),
                reference.1.iterations(),
                reference.1.final_residual(),
                reference.1.outcome.label()
            );
            info.outcomes.push(format!("reference {}", fmt_outcome(&ref_case, &reference.1)));
            if !reference.1.outcome.is_converged() {
                failed_reference.get_or_insert_with(|| fmt_outcome(&ref_case, &reference.1));
                continue;
            }

            let cases: Vec<Case> = dc
                .p
                .iter()
                .flat_map(|&p| dc.levels.iter().map(move |&level| Case { k, epsilon, f, p, level, scheme }))
                .collect();
            for c in &cases {
                info.add_mesh(&*cache.mesh(c.level, cfg.geometric_degree(c.p))?);
            }
            let runs = parallel_map(&cases, threads, |c| -> Result<LevelRun, CliError> {
                let space = cache.space(c.level, cfg.geometric_degree(c.p), c.p)?;
                let (u, trace) = solve_nonlinear(&space, &cfg.spec(c))?;
                let err = error_vs_reference(&u, &reference.0, k)?;
                Ok(LevelRun { level: c.level, ndofs: space.n_dofs(), trace, err, linf: linf_on_d(&u) })
            });
            let mut runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter();
            let mut plot_series = Vec::new();
            for &p in &dc.p {
                let mut report = ErrorReport::default();
                let mut outcomes = Vec::new();
                for c in cases.iter().filter(|c| c.p == p) {
                    let run = runs.next().expect("one run per case");
                    let h = 0.5f64.powi(run.level as i32);
                    report.push(run.level, h, run.ndofs, run.err, run.linf);
                    let _ = writeln!(
                        outcomes_csv,
                        "{k},{epsilon},{p},{},{},{},{:.6e},{}",
                        run.level,
                        scheme.name(),
                        run.trace.iterations(),
                        run.trace.final_residual(),
                        run.trace.outcome.label()
                    );
                    info.outcomes.push(fmt_outcome(c, &run.trace));
                    outcomes.push(run.trace.outcome);
                }
                report.fit_rates();
                for r in &report.rows {
                    let _ = writeln!(dofs_csv, "{k},{epsilon},{p},{},{},{:.6e}", r.level, r.ndofs, r.rel_energy);
                }
                let target = cfg.output.error_target;
                let reached = report.rows.iter().filter(|r| r.rel_energy <= target).map(|r| r.ndofs).min();
                let _ = writeln!(target_csv, "{k},{epsilon},{p},{target},{}", reached.map(|n| n.to_string()).unwrap_or_default());
                let name = format!("convergence_k{}_eps{}_p{p}.csv", tag(k), tag(epsilon));
                files.push(write_atomic(dir, &name, report.to_csv().as_bytes())?);
                plot_series.push(Series {
                    name: format!("p = {p}"),
                    points: report.rows.iter().map(|r| (r.h, r.rel_energy)).collect(),
                });
                series.push(ConvergenceSeries { k, epsilon, p, report, outcomes });
            }
            let plot = Plot {
                title: format!("relative energy error, k = {k}, epsilon = {epsilon}"),
                x_label: "h = 2^-level".into(),
                y_label: "relative error".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Log,
                series: plot_series,
            };
            write_svg(cfg, &format!("convergence_k{}_eps{}.svg", tag(k), tag(epsilon)), &plot)?;
        }
    }
    files.push(write_atomic(dir, "convergence_outcomes.csv", outcomes_csv.as_bytes())?);
    files.push(write_atomic(dir, "dofs.csv", dofs_csv.as_bytes())?);
    files.push(write_atomic(dir, "dofs_to_target.csv", target_csv.as_bytes())?);
    files.push(write_manifest(cfg, &info)?);
    match failed_reference {
        Some(m) => Err(CliError::NotConverged(format!("reference solve failed: {m}"))),
        None => Ok(ConvergenceResult { series, files }),
    }
}

#[derive(Debug, Clone)]
pub struct IterationRow {
    pub case: Case,
    pub iterations: usize,
    pub final_residual: f64,
    pub outcome: Outcome,
}

/// Iteration counts for every (k, p, level, scheme) tuple.
pub fn iterations(cfg: &RunConfig, threads: usize) -> Result<Vec<IterationRow>, CliError> {
    single("problem.epsilon", &cfg.problem.epsilon)?;
    single("problem.f", &cfg.source_values())?;
    let cache = SpaceCache::default();
    let cases = cfg.cases();
    let mut info = RunInfo::new("iterations");
    for c in &cases {
        info.add_mesh(&*cache.mesh(c.level, cfg.geometric_degree(c.p))?);
    }
    let rows = parallel_map(&cases, threads, |c| -> Result<IterationRow, CliError> {
        let space = cache.space(c.level, cfg.geometric_degree(c.p), c.p)?;
        let (_, trace) = solve_nonlinear(&space, &cfg.spec(c))?;
        Ok(IterationRow { case: *c, iterations: trace.iterations(), final_residual: trace.final_residual(), outcome: trace.outcome })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut csv = format!("{ITERATIONS_CSV_HEADER}\n");
    for r in &rows {
        let c = &r.case;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{:.6e},{}",
            c.k,
            c.level,
            c.p,
            c.scheme.name(),
            r.iterations,
            r.final_residual,
            r.outcome.label()
        );
        info.outcomes.push(format!(
            "k={} p={} level={} scheme={}: {} after {} iterations",
            c.k,
            c.p,
            c.level,
            c.scheme.name(),
            r.outcome.label(),
            r.iterations
        ));
    }
    write_atomic(&cfg.output.directory, "iterations.csv", csv.as_bytes())?;
    write_manifest(cfg, &info)?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ContractionRow {
    pub case: Case,
    pub trace: IterationTrace,
}

fn trace_name(c: &Case) -> String {
    format!("trace_{}_k{}_eps{}_f{}_p{}_l{}.csv", c.scheme.name(), tag(c.k), tag(c.epsilon), tag(c.f), c.p, c.level)
}

/// Contraction factors of every run of the sweep: one trace CSV per run,
/// an averages CSV and a plot of the factors over the iterations.
pub fn contraction(cfg: &RunConfig, threads: usize) -> Result<Vec<ContractionRow>, CliError> {
    let cache = SpaceCache::default();
    let cases = cfg.cases();
    let dir = &cfg.output.directory;
    let mut info = RunInfo::new("contraction");
    for c in &cases {
        info.add_mesh(&*cache.mesh(c.level, cfg.geometric_degree(c.p))?);
    }
    let rows = parallel_map(&cases, threads, |c| -> Result<ContractionRow, CliError> {
        let space = cache.space(c.level, cfg.geometric_degree(c.p), c.p)?;
        let (_, trace) = solve_nonlinear(&space, &cfg.spec(c))?;
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, true).expect("in-memory write");
        write_atomic(dir, &trace_name(c), &buf)?;
        Ok(ContractionRow { case: *c, trace })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut csv = format!("{CONTRACTION_CSV_HEADER}\n");
    let mut plot_series = Vec::new();
    for r in &rows {
        let c = &r.case;
        let avg = r.trace.average_sigma().map(|s| format!("{s:.6e}")).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{avg},{},{:.6e},{}",
            c.scheme.name(),
            c.k,
            c.epsilon,
            c.f,
            c.p,
            c.level,
            r.trace.iterations(),
            r.trace.final_residual(),
            r.trace.outcome.label()
        );
        info.outcomes.push(fmt_outcome(c, &r.trace));
        plot_series.push(Series {
            name: format!("{} eps={} f={}", c.scheme.name(), c.epsilon, c.f),
            points: r.trace.records.iter().filter_map(|x| Some((x.iter as f64, x.sigma?))).collect(),
        });
    }
    write_atomic(dir, "contraction.csv", csv.as_bytes())?;
    let plot = Plot {
        title: "contraction factors".into(),
        x_label: "iteration".into(),
        y_label: "sigma".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Log,
        series: plot_series,
    };
    write_svg(cfg, "contraction.svg", &plot)?;
    write_manifest(cfg, &info)?;
    Ok(rows)
}

/// One solve; writes the mesh dump, the coefficients, the trace and the
/// manifest. A run that does not converge still writes everything and then
/// reports [`CliError::NotConverged`].
pub fn solve(cfg: &RunConfig) -> Result<(FeField, IterationTrace), CliError> {
    let case = Case {
        k: single("problem.k", &cfg.problem.k)?,
        epsilon: single("problem.epsilon", &cfg.problem.epsilon)?,
        f: single("problem.f", &cfg.source_values())?,
        p: single("discretization.p", &cfg.discretization.p)?,
        level: single("discretization.levels", &cfg.discretization.levels)?,
        scheme: single("solver.scheme", &cfg.schemes())?,
    };
    let cache = SpaceCache::default();
    let space = cache.space(case.level, cfg.geometric_degree(case.p), case.p)?;
    let (u, trace) = solve_nonlinear(&space, &cfg.spec(&case))?;
    let dir = &cfg.output.directory;
    write_atomic(dir, "mesh.txt", space.mesh().to_dump().as_bytes())?;
    let mut coeffs = String::with_capacity(48 * u.coeffs().len());
    for (i, c) in u.coeffs().iter().enumerate() {
        let _ = writeln!(coeffs, "{i} {:.17e} {:.17e}", c.re, c.im);
    }
    write_atomic(dir, "coefficients.txt", coeffs.as_bytes())?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf, true).expect("in-memory write");
    write_atomic(dir, "trace.csv", &buf)?;
    let mut info = RunInfo::new("solve");
    info.add_mesh(space.mesh());
    info.outcomes.push(fmt_outcome(&case, &trace));
    write_manifest(cfg, &info)?;
    if trace.outcome.is_converged() {
        Ok((u, trace))
    } else {
        Err(CliError::NotConverged(fmt_outcome(&case, &trace)))
    }
}

/// Mesh statistics for every configured level and geometric degree.
pub fn mesh_info(cfg: &RunConfig) -> Result<String, CliError> {
    let cache = SpaceCache::default();
    let mut degrees: Vec<usize> = cfg.discretization.p.iter().map(|&p| cfg.geometric_degree(p)).collect();
    degrees.sort_unstable();
    degrees.dedup();
    let mut csv = format!("{MESH_INFO_CSV_HEADER}\n");
    let mut info = RunInfo::new("mesh-info");
    for &q in &degrees {
        for &level in &cfg.discretization.levels {
            let m = cache.mesh(level, q)?;
            info.add_mesh(&m);
            let _ = writeln!(
                csv,
                "{level},{q},{},{},{},{},{:.6e},{:.12}",
                m.n_vertices(),
                m.n_triangles(),
                m.n_edges(),
                m.n_curved(),
                m.h(),
                m.area()
            );
        }
    }
    write_atomic(&cfg.output.directory, "mesh_info.csv", csv.as_bytes())?;
    write_manifest(cfg, &info)?;
    Ok(csv)
}
