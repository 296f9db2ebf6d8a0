//! Line-oriented ASCII mesh format:
//!
//! ```text
//! mesh2d v1
//! nodes N
//! x y            (N lines)
//! triangles M
//! i j k region   (M lines)
//! bedges B
//! i j tag        (B lines)
//! ```
//!
//! Indices are 0-based. Floats are written with the shortest representation
//! that round-trips exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{BoundaryEdge, Mesh2D, Region, Triangle};
use crate::error::{Error, Result};

const HEADER: &str = "mesh2d v1";

pub fn write_mesh(mesh: &Mesh2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_mesh_to(mesh, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_mesh_to<W: Write>(mesh: &Mesh2D, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "nodes {}", mesh.nodes.len())?;
    for [x, y] in &mesh.nodes {
        writeln!(out, "{x:?} {y:?}")?;
    }
    writeln!(out, "triangles {}", mesh.triangles.len())?;
    for t in &mesh.triangles {
        let [i, j, k] = t.nodes;
        writeln!(out, "{i} {j} {k} {}", t.region)?;
    }
    writeln!(out, "bedges {}", mesh.boundary_edges.len())?;
    for e in &mesh.boundary_edges {
        let [i, j] = e.nodes;
        writeln!(out, "{i} {j} {}", e.tag)?;
    }
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh2D> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank line with its 1-based line number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let line = line.trim();
            if !line.is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| {
            Error::parse(
                self.last + 1,
                format!("unexpected end of file, expected {what}"),
            )
        })
    }

    fn section(&mut self, keyword: &str) -> Result<usize> {
        let (ln, line) = self.expect(&format!("`{keyword} <count>`"))?;
        let mut it = line.split_whitespace();
        match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
            (Some(k), Some(Ok(n)), None) if k == keyword => Ok(n),
            _ => Err(Error::parse(
                ln,
                format!("expected `{keyword} <count>`, found `{line}`"),
            )),
        }
    }
}

fn fields<const N: usize>(ln: usize, line: &str) -> Result<[&str; N]> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| Error::parse(ln, format!("expected {N} fields, found {}", p.len())))
}

fn index(ln: usize, s: &str, n_nodes: usize) -> Result<usize> {
    let i: usize = s
        .parse()
        .map_err(|_| Error::parse(ln, format!("invalid node index `{s}`")))?;
    if i >= n_nodes {
        return Err(Error::parse(
            ln,
            format!("node index {i} out of range ({n_nodes} nodes)"),
        ));
    }
    Ok(i)
}

pub(crate) fn parse_mesh(text: &str) -> Result<Mesh2D> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let Some((ln, header)) = lines.next() else {
        return Err(Error::parse(1, "no nodes"));
    };
    if header != HEADER {
        return Err(Error::parse(
            ln,
            format!("expected header `{HEADER}`, found `{header}`"),
        ));
    }
    let n_nodes = lines.section("nodes")?;
    if n_nodes == 0 {
        return Err(Error::parse(lines.last, "no nodes"));
    }
    let mut mesh = Mesh2D::default();
    for _ in 0..n_nodes {
        let (ln, line) = lines.expect("a node line")?;
        let [x, y] = fields::<2>(ln, line)?;
        let coord = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(ln, format!("invalid coordinate `{s}`")))
        };
        mesh.nodes.push([coord(x)?, coord(y)?]);
    }
    let n_tri = lines.section("triangles")?;
    for _ in 0..n_tri {
        let (ln, line) = lines.expect("a triangle line")?;
        let [i, j, k, region] = fields::<4>(ln, line)?;
        let nodes = [
            index(ln, i, n_nodes)?,
            index(ln, j, n_nodes)?,
            index(ln, k, n_nodes)?,
        ];
        let region: Region = region
            .parse()
            .map_err(|_| Error::parse(ln, format!("unknown region tag `{region}`")))?;
        mesh.triangles.push(Triangle { nodes, region });
    }
    let n_edges = lines.section("bedges")?;
    for _ in 0..n_edges {
        let (ln, line) = lines.expect("a boundary edge line")?;
        let [i, j, tag] = fields::<3>(ln, line)?;
        mesh.boundary_edges.push(BoundaryEdge {
            nodes: [index(ln, i, n_nodes)?, index(ln, j, n_nodes)?],
            tag: tag.to_owned(),
        });
    }
    if let Some((ln, line)) = lines.next() {
        return Err(Error::parse(ln, format!("trailing content `{line}`")));
    }
    let boundary_lines = lines.last;
    mesh.validate().map_err(|e| match e {
        Error::InvalidMesh(m) => Error::parse(boundary_lines, m),
        other => other,
    })?;
    Ok(mesh)
}
