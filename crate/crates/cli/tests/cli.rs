use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_nlhelm");

fn nlhelm(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("NLHELM_THREADS");
    if let Some(t) = threads {
        cmd.env("NLHELM_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn first_line(dir: &Path, name: &str) -> String {
    read(dir, name).lines().next().unwrap().to_string()
}

const SMALL: &str = "[problem]\nk = 8\nepsilon = 0.1\nsource = \"constant\"\nf = 50\n[discretization]\np = 2\nlevels = 2\n";

#[test]
fn minimal_solve_writes_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = nlhelm(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["mesh.txt", "coefficients.txt", "manifest.toml", "trace.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    assert!(read(&out, "mesh.txt").starts_with("nlhelm-mesh 1\nlevel 2\n"));
    let coeffs = read(&out, "coefficients.txt");
    let first: Vec<&str> = coeffs.lines().next().unwrap().split(' ').collect();
    assert_eq!(first.len(), 3);
    assert_eq!(first[0], "0");
    assert_eq!(coeffs.lines().count(), 545);
    assert_eq!(first_line(&out, "trace.csv"), "iter,rel_residual,increment_energy,sigma,wall_ms");
    assert!(read(&out, "manifest.toml").contains("CONVERGED"));
}

#[test]
fn unknown_key_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[solver]\nmaxiter = 3\n");
    let o = nlhelm(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("maxiter"));

    let o = nlhelm(&["iterations", "--p", "5"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = nlhelm(&["solve", "--preset", "nonexistent"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = nlhelm(&["mesh-info", "--levels", "0"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NLHELM_THREADS"));
    let o = nlhelm(&["convergence", "--levels", "2,3", "--reference-level", "3"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_three_and_keeps_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let args = ["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--k", "16", "--f", "150", "--levels", "3"];
    let o = nlhelm(&args, None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MAX_ITER_REACHED"));
    let trace = read(&out, "trace.csv");
    assert_eq!(trace.lines().count(), 51);
    let last: Vec<&str> = trace.lines().last().unwrap().split(',').collect();
    assert!(last[1].parse::<f64>().unwrap() > 0.05);
    assert!(read(&out, "manifest.toml").contains("MAX_ITER_REACHED"));
}

#[test]
fn sweeps_are_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut runs = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let args = ["iterations", "--config", &cfg, "--out", out.to_str().unwrap(), "--k", "8,16", "--p", "1,2"];
        let o = nlhelm(&args, Some(threads));
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(read(&out, "iterations.csv"));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    let lines: Vec<&str> = runs[0].lines().collect();
    assert_eq!(lines[0], "k,h_level,p,scheme,iters,final_residual,outcome");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("8,2,1,frozen,") && lines[1].ends_with(",CONVERGED"));
    assert!(lines[4].starts_with("16,2,2,frozen,"));
}

#[test]
fn contraction_traces_match_modulo_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let strip = |s: String| -> Vec<String> {
        s.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
    };
    let mut traces = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("c{i}"));
        let args = ["contraction", "--config", &cfg, "--out", out.to_str().unwrap(), "--epsilon", "0,0.1", "--scheme", "frozen,newtonlike"];
        let o = nlhelm(&args, None);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(first_line(&out, "contraction.csv"), "scheme,k,epsilon,f,p,h_level,avg_sigma,iters,final_residual,outcome");
        assert!(out.join("contraction.svg").is_file());
        let linear = read(&out, "trace_frozen_k8_eps0_f50_p2_l2.csv");
        let rows: Vec<&str> = linear.lines().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].split(',').nth(3), Some(""));
        let summary = read(&out, "contraction.csv");
        let eps0 = summary.lines().nth(1).unwrap();
        assert!(eps0.starts_with("frozen,8,0,50,2,2,,1,"), "{eps0}");
        traces.push(strip(read(&out, "trace_newtonlike_k8_eps0.1_f50_p2_l2.csv")));
    }
    assert_eq!(traces[0], traces[1]);
    assert!(traces[0].len() > 3);
}

#[test]
fn convergence_study_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv");
    let args = [
        "convergence", "--out", out.to_str().unwrap(), "--source", "plane-wave", "--k", "4", "--epsilon", "0",
        "--p", "1,2", "--levels", "1,2,3", "--reference-level", "4", "--reference-p", "2",
    ];
    let o = nlhelm(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out, "convergence_k4_eps0_p2.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,h,ndofs,rel_energy_err,rel_l2_err,slope");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(','));
    let slope: f64 = lines[3].rsplit(',').next().unwrap().parse().unwrap();
    assert!(slope > 1.0 && slope < 3.0, "{slope}");
    assert_eq!(first_line(&out, "dofs.csv"), "k,epsilon,p,level,ndofs,rel_energy_err");
    assert_eq!(first_line(&out, "dofs_to_target.csv"), "k,epsilon,p,target,min_ndofs");
    assert_eq!(first_line(&out, "convergence_outcomes.csv"), "k,epsilon,p,level,scheme,iters,final_residual,outcome");
    assert!(read(&out, "convergence_k4_eps0.svg").contains("p = 2"));

    // The manifest reproduces the run.
    let again = dir.path().join("again");
    let manifest = out.join("manifest.toml");
    let o = nlhelm(&["convergence", "--config", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&again, "convergence_k4_eps0_p2.csv"), csv);

    let single = dir.path().join("single");
    let args = [
        "convergence", "--out", single.to_str().unwrap(), "--source", "plane-wave", "--k", "4", "--epsilon", "0",
        "--p", "1", "--levels", "2", "--reference-level", "3", "--reference-p", "2", "--no-svg",
    ];
    assert_eq!(nlhelm(&args, None).status.code(), Some(0));
    let csv = read(&single, "convergence_k4_eps0_p1.csv");
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().ends_with(','));
    assert!(!single.join("convergence_k4_eps0.svg").exists());
}

#[test]
fn mesh_info_and_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mesh");
    let o = nlhelm(&["mesh-info", "--levels", "0,1", "--p", "2", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = read(&out, "mesh_info.csv");
    assert_eq!(csv.lines().next().unwrap(), "level,geometric_degree,vertices,triangles,edges,curved,h,area");
    assert!(csv.lines().nth(1).unwrap().starts_with("0,2,13,16,28,"));
    let o = nlhelm(&["mesh-info", "--preset", "iterations-hp", "--out", out.to_str().unwrap(), "--levels", "0"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out, "mesh_info.csv").lines().count(), 5);
}
