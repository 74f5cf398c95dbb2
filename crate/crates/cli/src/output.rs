use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(path)
}

/// Compact number formatting for file names: `8`, `0.01`, `1.2`.
pub fn tag(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshStats {
    pub level: usize,
    pub geometric_degree: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub curved: usize,
    pub h: f64,
}

impl MeshStats {
    pub fn of(mesh: &nlhelm_core::Mesh) -> Self {
        Self {
            level: mesh.level(),
            geometric_degree: mesh.geometric_degree(),
            vertices: mesh.n_vertices(),
            triangles: mesh.n_triangles(),
            curved: mesh.n_curved(),
            h: mesh.h(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub meshes: Vec<MeshStats>,
    pub outcomes: Vec<String>,
}

impl RunInfo {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            meshes: Vec::new(),
            outcomes: Vec::new(),
        }
    }

    pub fn add_mesh(&mut self, mesh: &nlhelm_core::Mesh) {
        let s = MeshStats::of(mesh);
        let seen = self.meshes.iter().any(|m| m.level == s.level && m.geometric_degree == s.geometric_degree);
        if !seen {
            self.meshes.push(s);
        }
    }
}

#[derive(Serialize)]
struct RunSection<'a> {
    run: &'a RunInfo,
}

/// The resolved configuration followed by a `[run]` table; the file is a
/// valid configuration for the same command.
pub fn manifest(cfg: &RunConfig, info: &RunInfo) -> String {
    let mut text = cfg.to_toml();
    text.push('\n');
    text.push_str(&toml::to_string(&RunSection { run: info }).expect("manifest serializes"));
    text
}

pub fn write_manifest(cfg: &RunConfig, info: &RunInfo) -> Result<PathBuf, CliError> {
    write_atomic(&cfg.output.directory, "manifest.toml", manifest(cfg, info).as_bytes())
}
