use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlhelm_cli::config::{preset, SourceKind};
use nlhelm_cli::{threads_from_env, CliError, ReferenceCache, RunConfig};

/// Finite element experiments for the Helmholtz equation with a Kerr
/// nonlinearity on the unit disk.
#[derive(Parser)]
#[command(name = "nlhelm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy-error convergence against a reference solution.
    Convergence(Overrides),
    /// Fixed-point iteration counts over a parameter sweep.
    Iterations(Overrides),
    /// Contraction factors of both schemes over a parameter sweep.
    Contraction(Overrides),
    /// A single solve with mesh, coefficient and trace output.
    Solve(Overrides),
    /// Mesh statistics per refinement level.
    MeshInfo(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// Configuration file (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Built-in configuration: convergence, iterations-k, iterations-hp,
    /// contraction-f or contraction-eps.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// bump, constant or plane-wave.
    #[arg(long)]
    source: Option<String>,
    /// Constant source values.
    #[arg(long, value_delimiter = ',')]
    f: Option<Vec<f64>>,
    /// Constant impedance data.
    #[arg(long)]
    g: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    geometric_degree: Option<usize>,
    #[arg(long)]
    reference_level: Option<usize>,
    #[arg(long)]
    reference_p: Option<usize>,
    /// frozen and/or newtonlike.
    #[arg(long, value_delimiter = ',')]
    scheme: Option<Vec<String>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Skip the SVG plots.
    #[arg(long)]
    no_svg: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let text = match (&self.config, &self.preset) {
            (Some(path), _) => std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
            (None, Some(name)) => preset(name)?.to_string(),
            (None, None) => String::new(),
        };
        let mut cfg = RunConfig::parse(&text)?;
        let (pc, dc, sc) = (&mut cfg.problem, &mut cfg.discretization, &mut cfg.solver);
        if let Some(v) = &self.k {
            pc.k = v.clone();
        }
        if let Some(v) = &self.epsilon {
            pc.epsilon = v.clone();
        }
        if let Some(s) = &self.source {
            pc.source = match s.as_str() {
                "bump" => SourceKind::Bump,
                "constant" => SourceKind::Constant,
                "plane-wave" => SourceKind::PlaneWave,
                other => return Err(CliError::Config(format!("unknown source '{other}'"))),
            };
        }
        if let Some(v) = &self.f {
            pc.f = v.clone();
        }
        if let Some(v) = self.g {
            pc.g = v;
        }
        if let Some(v) = &self.p {
            dc.p = v.clone();
        }
        if let Some(v) = &self.levels {
            dc.levels = v.clone();
        }
        if let Some(v) = self.geometric_degree {
            dc.geometric_degree = Some(v);
        }
        if let Some(v) = self.reference_level {
            dc.reference_level = v;
        }
        if let Some(v) = self.reference_p {
            dc.reference_p = v;
        }
        if let Some(v) = &self.scheme {
            for s in v {
                s.parse::<nlhelm_core::Scheme>().map_err(|e| CliError::Config(e.to_string()))?;
            }
            sc.scheme = v.clone();
        }
        if let Some(v) = self.tol {
            sc.tol = v;
        }
        if let Some(v) = self.max_iter {
            sc.max_iter = v;
        }
        if let Some(v) = &self.out {
            cfg.output.directory = v.clone();
        }
        if self.no_svg {
            cfg.output.emit_svg = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Convergence(o) => {
            let cfg = o.resolve()?;
            let res = nlhelm_cli::convergence(&cfg, threads, &ReferenceCache::default())?;
            for s in &res.series {
                let slopes: Vec<String> = s.report.rows.iter().map(|r| r.slope.map_or("-".into(), |x| format!("{x:.2}"))).collect();
                println!("k = {}, epsilon = {}, p = {}: slopes {}", s.k, s.epsilon, s.p, slopes.join(" "));
            }
        }
        Command::Iterations(o) => {
            let cfg = o.resolve()?;
            for r in nlhelm_cli::iterations(&cfg, threads)? {
                let c = r.case;
                println!("k = {}, level {}, p = {}, {}: {} ({} iterations)", c.k, c.level, c.p, c.scheme.name(), r.outcome.label(), r.iterations);
            }
        }
        Command::Contraction(o) => {
            let cfg = o.resolve()?;
            for r in nlhelm_cli::contraction(&cfg, threads)? {
                let c = r.case;
                let avg = r.trace.average_sigma().map_or("-".into(), |s| format!("{s:.3}"));
                println!("{} epsilon = {}, f = {}: {} in {} iterations, mean sigma {avg}", c.scheme.name(), c.epsilon, c.f, r.trace.outcome.label(), r.trace.iterations());
            }
        }
        Command::Solve(o) => {
            let cfg = o.resolve()?;
            let (_, trace) = nlhelm_cli::solve(&cfg)?;
            println!("{} after {} iterations, residual {:.3e}", trace.outcome.label(), trace.iterations(), trace.final_residual());
        }
        Command::MeshInfo(o) => {
            let cfg = o.resolve()?;
            print!("{}", nlhelm_cli::mesh_info(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
