//! Plain-text mesh dump.
//!
//! ```text
//! nlhelm-mesh 1
//! level <L>
//! geometric_degree <q>
//! vertices <N>
//! v <x> <y>                      (N lines)
//! triangles <T>
//! t <i> <j> <k> <IN_D|OUT_D>     (T lines, 0-based vertex indices)
//! curved <C>
//! c <t> <x0> <y0> <x1> <y1> ...  (C lines, geometry nodes of triangle t)
//! ```
//!
//! Coordinates use 17 significant digits, so a dump read back reproduces
//! the vertices exactly.

use std::io::Write;

use super::build::finish;
use super::{Mesh, Point, Region};
use crate::error::{FemError, Result};

pub const DUMP_HEADER: &str = "nlhelm-mesh 1";

impl Mesh {
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{DUMP_HEADER}")?;
        writeln!(w, "level {}", self.level)?;
        writeln!(w, "geometric_degree {}", self.geometric_degree)?;
        writeln!(w, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "v {:.17e} {:.17e}", v[0], v[1])?;
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for (t, r) in self.triangles.iter().zip(&self.regions) {
            writeln!(w, "t {} {} {} {}", t[0], t[1], t[2], r.label())?;
        }
        writeln!(w, "curved {}", self.n_curved())?;
        for (t, c) in self.curved.iter().enumerate() {
            if let Some(c) = c {
                write!(w, "c {t}")?;
                for n in &c.nodes {
                    write!(w, " {:.17e} {:.17e}", n[0], n[1])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn to_dump(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Rebuilds a mesh from a dump. Curved maps are recomputed from the
    /// topology and compared with the listed nodes. The result carries no
    /// refinement history.
    pub fn from_dump(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| FemError::Parse { line: 0, message: format!("missing {what}") });
        let perr = |line: usize, message: String| FemError::Parse { line, message };

        let (ln, head) = next("header")?;
        if head != DUMP_HEADER {
            return Err(perr(ln, format!("expected '{DUMP_HEADER}'")));
        }
        let count = |(ln, l): (usize, &str), key: &str| -> Result<usize> {
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(perr(ln, format!("expected '{key}'")));
            }
            it.next().and_then(|s| s.parse().ok()).ok_or_else(|| perr(ln, format!("bad {key} value")))
        };
        let level = count(next("level")?, "level")?;
        let q = count(next("geometric_degree")?, "geometric_degree")?;
        let nv = count(next("vertices")?, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = next("vertex")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 || f[0] != "v" {
                return Err(perr(ln, "expected 'v x y'".into()));
            }
            let x: f64 = f[1].parse().map_err(|_| perr(ln, "bad x".into()))?;
            let y: f64 = f[2].parse().map_err(|_| perr(ln, "bad y".into()))?;
            vertices.push([x, y]);
        }
        let nt = count(next("triangles")?, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        let mut regions = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = next("triangle")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 5 || f[0] != "t" {
                return Err(perr(ln, "expected 't i j k flag'".into()));
            }
            let mut tri = [0usize; 3];
            for k in 0..3 {
                tri[k] = f[k + 1].parse().map_err(|_| perr(ln, "bad vertex index".into()))?;
            }
            regions.push(match f[4] {
                "IN_D" => Region::Inside,
                "OUT_D" => Region::Outside,
                other => return Err(perr(ln, format!("unknown region flag '{other}'"))),
            });
            triangles.push(tri);
        }
        let nc = count(next("curved")?, "curved")?;
        let mut listed: Vec<(usize, usize, Vec<Point>)> = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (ln, l) = next("curved line")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() < 2 || f[0] != "c" || f.len() % 2 != 0 {
                return Err(perr(ln, "expected 'c t x0 y0 ...'".into()));
            }
            let t: usize = f[1].parse().map_err(|_| perr(ln, "bad triangle index".into()))?;
            let mut nodes = Vec::new();
            for pair in f[2..].chunks(2) {
                let x: f64 = pair[0].parse().map_err(|_| perr(ln, "bad node".into()))?;
                let y: f64 = pair[1].parse().map_err(|_| perr(ln, "bad node".into()))?;
                nodes.push([x, y]);
            }
            listed.push((ln, t, nodes));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing content".into()));
        }
        let mesh = finish(vertices, triangles, regions, q, level, None, Vec::new())?;
        if listed.len() != mesh.n_curved() {
            return Err(perr(0, format!("{} curved lines listed, topology implies {}", listed.len(), mesh.n_curved())));
        }
        for (ln, t, nodes) in listed {
            let ok = mesh.curved.get(t).and_then(|c| c.as_ref()).is_some_and(|c| {
                c.nodes.len() == nodes.len()
                    && c.nodes.iter().zip(&nodes).all(|(a, b)| (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12)
            });
            if !ok {
                return Err(perr(ln, format!("curved nodes of triangle {t} do not match the topology")));
            }
        }
        Ok(mesh)
    }
}
