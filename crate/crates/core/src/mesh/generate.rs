use alloc::{collections::BTreeMap, string::ToString, vec, vec::Vec};
use core::{f64::consts::PI, str::FromStr};

use super::{area_centroid, Mesh, MeshError, Point};

/// The three built-in mesh families on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshFamily {
    /// `n × n` squares, each split into two right triangles along the
    /// south-west to north-east diagonal.
    Triangular,
    /// `n × n` quadrilaterals with a banded sinusoidal vertical shear.
    DistortedQuad,
    /// Hexagons with `n` cells per row, clipped to the square along the
    /// boundary.
    Hexagonal,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 3] = [MeshFamily::Triangular, MeshFamily::DistortedQuad, MeshFamily::Hexagonal];

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Triangular => "triangular",
            MeshFamily::DistortedQuad => "distorted_quad",
            MeshFamily::Hexagonal => "hexagonal",
        }
    }
}

impl core::fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "triangular" | "tri" => Ok(MeshFamily::Triangular),
            "distorted_quad" | "kershaw" | "quad" => Ok(MeshFamily::DistortedQuad),
            "hexagonal" | "hex" | "polygonal" => Ok(MeshFamily::Hexagonal),
            other => Err(MeshError::UnknownFamily(other.to_string())),
        }
    }
}

/// Generates a mesh of the unit square. `distortion` only affects
/// [`MeshFamily::DistortedQuad`].
pub fn generate(family: MeshFamily, n: usize, distortion: f64) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidSubdivision);
    }
    match family {
        MeshFamily::Triangular => triangular(n),
        MeshFamily::DistortedQuad => {
            if !(0.0..1.0).contains(&distortion) {
                return Err(MeshError::InvalidDistortion(distortion));
            }
            distorted_quad(n, distortion)
        }
        MeshFamily::Hexagonal => hexagonal(n),
    }
}

fn grid_vertices(n: usize) -> Vec<Point> {
    let h = 1.0 / n as f64;
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            v.push(Point::new(x, y));
        }
    }
    v
}

fn triangular(n: usize) -> Result<Mesh, MeshError> {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_cells(grid_vertices(n), cells)
}

/// Banded shear amplitude: a zigzag in `x` with four bands, scaled so that
/// `y ↦ y + d·a(x)·sin(2πy)` stays monotone for every `d < 1`.
fn shear_amplitude(x: f64) -> f64 {
    let s = 4.0 * x;
    let band = libm::floor(s).min(3.0);
    let r = s - band;
    let zig = if band as i64 % 2 == 0 { 1.0 - 2.0 * r } else { 2.0 * r - 1.0 };
    zig / (2.0 * PI)
}

fn distorted_quad(n: usize, distortion: f64) -> Result<Mesh, MeshError> {
    let mut vertices = grid_vertices(n);
    for p in vertices.iter_mut() {
        if p.y > 0.0 && p.y < 1.0 {
            p.y += distortion * shear_amplitude(p.x) * libm::sin(2.0 * PI * p.y);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_cells(vertices, cells)
}

/// Sutherland–Hodgman clip against the half-plane `sign·(coord − level) ≥ 0`.
fn clip(poly: &[[f64; 2]], axis: usize, level: f64, sign: f64) -> Vec<[f64; 2]> {
    let inside = |p: &[f64; 2]| sign * (p[axis] - level) >= 0.0;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (ci, ni) = (inside(&cur), inside(&next));
        if ci {
            out.push(cur);
        }
        if ci != ni {
            let t = (level - cur[axis]) / (next[axis] - cur[axis]);
            let mut p = [cur[0] + t * (next[0] - cur[0]), cur[1] + t * (next[1] - cur[1])];
            p[axis] = level;
            out.push(p);
        }
    }
    out
}

fn hexagonal(n: usize) -> Result<Mesh, MeshError> {
    // Rows are spaced so that the bottom and top rows are centred on the boundary;
    // the row count keeps the hexagons close to regular.
    let rows = libm::round(2.0 * n as f64 / libm::sqrt(3.0)).max(1.0) as usize;
    // Every vertex and every clip point lies on the lattice (dx/2)·Z × (dy/3)·Z,
    // so the construction runs in integer lattice units and is exact.
    let (width, height) = ((2 * n) as f64, (3 * rows) as f64);

    let mut ids: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for j in 0..=rows {
        let cy = (3 * j) as f64;
        let odd = j % 2 == 1;
        let count = if odd { n + 1 } else { n };
        for i in 0..count {
            let cx = if odd { (2 * i) as f64 } else { (2 * i + 1) as f64 };
            let hex = [
                [cx, cy - 2.0],
                [cx + 1.0, cy - 1.0],
                [cx + 1.0, cy + 1.0],
                [cx, cy + 2.0],
                [cx - 1.0, cy + 1.0],
                [cx - 1.0, cy - 1.0],
            ];
            let mut poly = clip(&hex, 0, 0.0, 1.0);
            poly = clip(&poly, 0, width, -1.0);
            poly = clip(&poly, 1, 0.0, 1.0);
            poly = clip(&poly, 1, height, -1.0);
            let mut cell: Vec<usize> = Vec::with_capacity(poly.len());
            for p in &poly {
                let key = (libm::round(p[0]) as i64, libm::round(p[1]) as i64);
                let id = *ids.entry(key).or_insert_with(|| {
                    vertices.push(Point::new(key.0 as f64 / width, key.1 as f64 / height));
                    vertices.len() - 1
                });
                if cell.last() != Some(&id) {
                    cell.push(id);
                }
            }
            while cell.len() > 1 && cell.first() == cell.last() {
                cell.pop();
            }
            let poly: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            if cell.len() < 3 || area_centroid(&poly).0 <= 0.0 {
                continue;
            }
            cells.push(cell);
        }
    }
    Mesh::from_cells(vertices, cells)
}
