//! Polygonal meshes of a planar domain.
//!
//! A [`Mesh`] is built from a vertex list and counter-clockwise cell loops;
//! faces, outward normals, diameters and centroids are always derived, never
//! supplied. Faces are numbered by sorting their (min, max) vertex pair, so
//! the numbering depends only on the cell list.

mod generate;

pub use generate::{generate, MeshFamily};

use alloc::{string::String, vec, vec::Vec};
use core::fmt;

use nalgebra::{Point2, Vector2};

pub type Point = Point2<f64>;
pub type Vector = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("mesh has no cells")]
    Empty,
    #[error("cell {cell}: vertex index {index} out of range")]
    VertexOutOfRange { cell: usize, index: usize },
    #[error("cell {cell}: fewer than three distinct vertices")]
    TooFewVertices { cell: usize },
    #[error("cell {cell}: non-positive signed area {area:e} (cells must be counter-clockwise)")]
    NotCounterClockwise { cell: usize, area: f64 },
    #[error("cell {cell}: polygon is not simple")]
    NotSimple { cell: usize },
    #[error("cell {cell}: edge ({a}, {b}) is shared by more than two cells")]
    NonManifoldFace { cell: usize, a: usize, b: usize },
    #[error("cell {cell}: edge ({a}, {b}) has the same orientation as in a neighbouring cell")]
    InconsistentOrientation { cell: usize, a: usize, b: usize },
    #[error("subdivision count must be at least 1")]
    InvalidSubdivision,
    #[error("distortion must lie in [0, 1), got {0}")]
    InvalidDistortion(f64),
    #[error("unknown mesh family `{0}` (expected triangular, distorted_quad or hexagonal)")]
    UnknownFamily(String),
    #[error("invariant violated at index {index}: {what}")]
    Invariant { what: &'static str, index: usize },
}

/// A mesh edge. `vertices` follow the counter-clockwise traversal of `left`.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    faces: Vec<Face>,
    // Faces of each cell in ascending global index, with matching outward normals.
    cell_faces: Vec<Vec<usize>>,
    cell_normals: Vec<Vec<Vector>>,
    cell_diameters: Vec<f64>,
    cell_areas: Vec<f64>,
    cell_centroids: Vec<Point>,
    face_lengths: Vec<f64>,
}

impl fmt::Debug for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mesh")
            .field("vertices", &self.vertices.len())
            .field("cells", &self.cells.len())
            .field("faces", &self.faces.len())
            .finish()
    }
}

impl Mesh {
    /// Builds a mesh from vertices and counter-clockwise cell loops, deriving
    /// the face topology and all geometric quantities.
    pub fn from_cells(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut cell_areas = Vec::with_capacity(cells.len());
        let mut cell_centroids = Vec::with_capacity(cells.len());
        let mut cell_diameters = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if let Some(&index) = cell.iter().find(|&&i| i >= vertices.len()) {
                return Err(MeshError::VertexOutOfRange { cell: c, index });
            }
            let poly: Vec<Point> = cell.iter().map(|&i| vertices[i]).collect();
            let distinct = (0..cell.len()).all(|i| cell[i] != cell[(i + 1) % cell.len()]);
            if cell.len() < 3 || !distinct {
                return Err(MeshError::TooFewVertices { cell: c });
            }
            let (area, centroid) = area_centroid(&poly);
            if !(area > 0.0) {
                return Err(MeshError::NotCounterClockwise { cell: c, area });
            }
            if !is_simple(&poly) {
                return Err(MeshError::NotSimple { cell: c });
            }
            cell_areas.push(area);
            cell_centroids.push(centroid);
            cell_diameters.push(diameter(&poly));
        }

        // (min, max, cell, forward) for every cell edge; sorting groups shared edges.
        let mut edges: Vec<(usize, usize, usize, bool)> = Vec::new();
        for (c, cell) in cells.iter().enumerate() {
            for i in 0..cell.len() {
                let (a, b) = (cell[i], cell[(i + 1) % cell.len()]);
                edges.push((a.min(b), a.max(b), c, a < b));
            }
        }
        edges.sort_unstable();

        let mut faces = Vec::new();
        let mut cell_faces: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j].0 == edges[i].0 && edges[j].1 == edges[i].1 {
                j += 1;
            }
            let (a, b, left, forward) = edges[i];
            match j - i {
                1 => {}
                2 => {
                    if edges[i + 1].3 == forward {
                        return Err(MeshError::InconsistentOrientation { cell: edges[i + 1].2, a, b });
                    }
                }
                _ => return Err(MeshError::NonManifoldFace { cell: edges[i + 2].2, a, b }),
            }
            let index = faces.len();
            let right = (j - i == 2).then(|| edges[i + 1].2);
            faces.push(Face { vertices: if forward { [a, b] } else { [b, a] }, left, right });
            cell_faces[left].push(index);
            if let Some(r) = right {
                cell_faces[r].push(index);
            }
            i = j;
        }

        let face_lengths: Vec<f64> = faces
            .iter()
            .map(|f| (vertices[f.vertices[1]] - vertices[f.vertices[0]]).norm())
            .collect();
        let cell_normals = cell_faces
            .iter()
            .enumerate()
            .map(|(c, fs)| {
                fs.iter()
                    .map(|&f| {
                        let face = &faces[f];
                        let t = vertices[face.vertices[1]] - vertices[face.vertices[0]];
                        let n = Vector::new(t.y, -t.x) / face_lengths[f];
                        if face.left == c { n } else { -n }
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            vertices,
            cells,
            faces,
            cell_faces,
            cell_normals,
            cell_diameters,
            cell_areas,
            cell_centroids,
            face_lengths,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Vertex coordinates of cell `c`, counter-clockwise.
    pub fn cell_polygon(&self, c: usize) -> Vec<Point> {
        self.cells[c].iter().map(|&i| self.vertices[i]).collect()
    }

    /// Global faces of cell `c`, ascending.
    pub fn cell_faces(&self, c: usize) -> &[usize] {
        &self.cell_faces[c]
    }

    /// Outward unit normals of cell `c`, aligned with [`Mesh::cell_faces`].
    pub fn cell_normals(&self, c: usize) -> &[Vector] {
        &self.cell_normals[c]
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        self.cell_diameters[c]
    }

    pub fn cell_diameters(&self) -> &[f64] {
        &self.cell_diameters
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        self.cell_areas[c]
    }

    /// Area centroid.
    pub fn cell_centroid(&self, c: usize) -> Point {
        self.cell_centroids[c]
    }

    pub fn face_length(&self, f: usize) -> f64 {
        self.face_lengths[f]
    }

    pub fn face_endpoints(&self, f: usize) -> (Point, Point) {
        let [a, b] = self.faces[f].vertices;
        (self.vertices[a], self.vertices[b])
    }

    pub fn face_midpoint(&self, f: usize) -> Point {
        let (a, b) = self.face_endpoints(f);
        nalgebra::center(&a, &b)
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.faces[f].is_boundary()
    }

    pub fn boundary_flags(&self) -> Vec<bool> {
        self.faces.iter().map(Face::is_boundary).collect()
    }

    pub fn num_boundary_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_boundary()).count()
    }

    pub fn total_area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    /// Checks the geometric invariants every mesh must satisfy: outward
    /// normals, opposite normals on interfaces, and the closed-polygon
    /// identity Σ_F |F| n_KF = 0 on every cell.
    pub fn validate(&self) -> Result<(), MeshError> {
        for c in 0..self.num_cells() {
            let centroid = self.cell_centroids[c];
            let scale = self.cell_diameters[c];
            let mut closure = Vector::zeros();
            for (&f, n) in self.cell_faces[c].iter().zip(&self.cell_normals[c]) {
                if n.dot(&(self.face_midpoint(f) - centroid)) <= 0.0 {
                    return Err(MeshError::Invariant { what: "normal is not outward", index: c });
                }
                closure += n * self.face_lengths[f];
            }
            if closure.norm() > 1e-12 * scale.max(1.0) {
                return Err(MeshError::Invariant { what: "cell boundary is not closed", index: c });
            }
        }
        for (f, face) in self.faces.iter().enumerate() {
            if let Some(r) = face.right {
                if self.face_normal(face.left, f) != -self.face_normal(r, f) {
                    return Err(MeshError::Invariant { what: "interface normals differ", index: f });
                }
            }
        }
        Ok(())
    }

    /// Outward normal of cell `c` on global face `f`.
    ///
    /// Panics if `f` is not a face of `c`.
    pub fn face_normal(&self, c: usize, f: usize) -> Vector {
        let local = self.cell_faces[c].binary_search(&f).expect("face does not belong to cell");
        self.cell_normals[c][local]
    }
}

/// Maximum cell diameter `h`.
pub fn mesh_size(mesh: &Mesh) -> f64 {
    mesh.cell_diameters.iter().copied().fold(0.0, f64::max)
}

/// Signed area and area centroid of a closed polygon.
pub fn area_centroid(poly: &[Point]) -> (f64, Point) {
    // Shift to the first vertex to limit cancellation.
    let o = poly[0];
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 1..poly.len().saturating_sub(1) {
        let p = poly[i] - o;
        let q = poly[i + 1] - o;
        let cross = p.x * q.y - q.x * p.y;
        area2 += cross;
        cx += cross * (p.x + q.x);
        cy += cross * (p.y + q.y);
    }
    let area = 0.5 * area2;
    if area2 == 0.0 {
        return (0.0, o);
    }
    (area, Point::new(o.x + cx / (3.0 * area2), o.y + cy / (3.0 * area2)))
}

/// Largest distance between two vertices.
pub fn diameter(poly: &[Point]) -> f64 {
    let mut d2: f64 = 0.0;
    for (i, p) in poly.iter().enumerate() {
        for q in &poly[i + 1..] {
            d2 = d2.max((p - q).norm_squared());
        }
    }
    libm::sqrt(d2)
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: &Point, b: &Point, p: &Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True if no two non-adjacent edges of the closed polygon touch.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(&poly[i], &poly[(i + 1) % n], &poly[j], &poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        Mesh::from_cells(v, vec![vec![0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn single_quad() {
        let m = unit_square();
        assert_eq!(m.num_faces(), 4);
        assert_eq!(m.num_boundary_faces(), 4);
        assert!((mesh_size(&m) - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((m.cell_centroid(0) - Point::new(0.5, 0.5)).norm() < 1e-15);
        m.validate().unwrap();
    }

    #[test]
    fn clockwise_cell_is_rejected() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)];
        let err = Mesh::from_cells(v, vec![vec![0, 2, 1]]).unwrap_err();
        assert!(matches!(err, MeshError::NotCounterClockwise { cell: 0, .. }));
    }

    #[test]
    fn bow_tie_is_not_simple() {
        // Positive net area but self-intersecting.
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(1.0, -1.0),
            Point::new(0.0, 2.0),
        ];
        let err = Mesh::from_cells(v, vec![vec![0, 1, 2, 3, 4]]).unwrap_err();
        assert!(matches!(err, MeshError::NotSimple { cell: 0 } | MeshError::NotCounterClockwise { .. }));
    }

    #[test]
    fn duplicated_edge_orientation() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)];
        // Both triangles traverse 1 -> 2.
        let err = Mesh::from_cells(v, vec![vec![0, 1, 2], vec![1, 2, 3]]).unwrap_err();
        assert!(matches!(err, MeshError::InconsistentOrientation { cell: 1, .. }) || matches!(err, MeshError::NotCounterClockwise { .. }));
    }

    #[test]
    fn non_manifold_edge() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, 1.0),
            Point::new(0.5, -1.0),
            Point::new(0.5, 0.5),
        ];
        let cells = vec![vec![0, 1, 2], vec![1, 0, 3], vec![0, 1, 4]];
        let err = Mesh::from_cells(v, cells).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldFace { .. }));
    }

    #[test]
    fn out_of_range_vertex() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let err = Mesh::from_cells(v, vec![vec![0, 1, 7]]).unwrap_err();
        assert_eq!(err, MeshError::VertexOutOfRange { cell: 0, index: 7 });
    }

    #[test]
    fn centroid_of_triangle() {
        let poly = [Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(0.0, 3.0)];
        let (a, c) = area_centroid(&poly);
        assert!((a - 4.5).abs() < 1e-14);
        assert!((c - Point::new(1.0, 1.0)).norm() < 1e-14);
    }
}
