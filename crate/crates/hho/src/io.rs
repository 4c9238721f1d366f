//! The `poly2d 1` mesh text format.
//!
//! ```text
//! poly2d 1
//! V <n>
//! x y            (n lines)
//! C <m>
//! k i1 … ik      (m lines, 0-based counter-clockwise vertex indices)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Faces, normals and
//! all other topology are derived on load.

use std::{fmt::Write as _, fs, path::Path};

use hho_core::mesh::{Mesh, MeshError, Point};
use thiserror::Error;

pub const HEADER: &str = "poly2d 1";

#[derive(Debug, Error)]
pub enum MeshFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Topology {
        line: usize,
        #[source]
        source: MeshError,
    },
    #[error("{path}: {error}")]
    Io { path: String, error: std::io::Error },
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next meaningful line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            self.last = i + 1;
            if !l.is_empty() && !l.starts_with('#') {
                return Some((i + 1, l));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), MeshFileError> {
        self.next()
            .ok_or_else(|| MeshFileError::Parse { line: self.last + 1, message: format!("unexpected end of file, expected {what}") })
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshFileError {
    MeshFileError::Parse { line, message: message.into() }
}

fn section(lines: &mut Lines<'_>, tag: &str) -> Result<usize, MeshFileError> {
    let (line, text) = lines.expect(&format!("`{tag} <count>`"))?;
    let mut it = text.split_whitespace();
    if it.next() != Some(tag) {
        return Err(parse_err(line, format!("expected `{tag} <count>`, found `{text}`")));
    }
    let count = it.next().and_then(|c| c.parse::<usize>().ok()).ok_or_else(|| parse_err(line, "invalid count"))?;
    if it.next().is_some() {
        return Err(parse_err(line, "trailing tokens"));
    }
    Ok(count)
}

/// Parses a mesh, reporting the offending line on any error.
pub fn parse_mesh(text: &str) -> Result<Mesh, MeshFileError> {
    let mut lines = Lines::new(text);
    let (line, header) = lines.expect("the header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["poly2d", "1"] {
        return Err(parse_err(line, format!("expected header `{HEADER}`, found `{header}`")));
    }

    let nv = section(&mut lines, "V")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, text) = lines.expect("a vertex")?;
        let coords: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("invalid coordinate `{t}`"))))
            .collect::<Result<_, _>>()?;
        match coords[..] {
            [x, y] if x.is_finite() && y.is_finite() => vertices.push(Point::new(x, y)),
            [_, _] => return Err(parse_err(line, "non-finite coordinate")),
            _ => return Err(parse_err(line, format!("expected 2 coordinates, found {}", coords.len()))),
        }
    }

    let nc = section(&mut lines, "C")?;
    let mut cells = Vec::with_capacity(nc);
    let mut cell_lines = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line, text) = lines.expect("a cell")?;
        let ints: Vec<usize> = text
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| parse_err(line, format!("invalid index `{t}`"))))
            .collect::<Result<_, _>>()?;
        let (&k, idx) = ints.split_first().ok_or_else(|| parse_err(line, "empty cell"))?;
        if idx.len() != k {
            return Err(parse_err(line, format!("cell declares {k} vertices but lists {}", idx.len())));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(parse_err(line, format!("vertex index {bad} out of range ({nv} vertices)")));
        }
        cells.push(idx.to_vec());
        cell_lines.push(line);
    }
    if let Some((line, text)) = lines.next() {
        return Err(parse_err(line, format!("unexpected content after the last cell: `{text}`")));
    }

    Mesh::from_cells(vertices, cells).map_err(|source| {
        let line = cell_index(&source).and_then(|c| cell_lines.get(c).copied()).unwrap_or(1);
        MeshFileError::Topology { line, source }
    })
}

fn cell_index(e: &MeshError) -> Option<usize> {
    match *e {
        MeshError::VertexOutOfRange { cell, .. }
        | MeshError::TooFewVertices { cell }
        | MeshError::NotCounterClockwise { cell, .. }
        | MeshError::NotSimple { cell }
        | MeshError::NonManifoldFace { cell, .. }
        | MeshError::InconsistentOrientation { cell, .. } => Some(cell),
        _ => None,
    }
}

/// Serializes a mesh. Coordinates use the shortest representation that
/// parses back to the same `f64`, so the format round-trips exactly.
pub fn format_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "V {}", mesh.vertices().len()).unwrap();
    for v in mesh.vertices() {
        writeln!(out, "{:?} {:?}", v.x, v.y).unwrap();
    }
    writeln!(out, "C {}", mesh.num_cells()).unwrap();
    for cell in mesh.cells() {
        write!(out, "{}", cell.len()).unwrap();
        for i in cell {
            write!(out, " {i}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|error| MeshFileError::Io { path: path.display().to_string(), error })?;
    parse_mesh(&text)
}

pub fn write_mesh(path: impl AsRef<Path>, mesh: &Mesh) -> Result<(), MeshFileError> {
    let path = path.as_ref();
    fs::write(path, format_mesh(mesh)).map_err(|error| MeshFileError::Io { path: path.display().to_string(), error })
}
