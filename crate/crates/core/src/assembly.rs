//! Global numbering, sparse assembly and loads.
//!
//! Global unknowns are numbered cell-major first (all cell blocks), then
//! face-major over interior faces only. Boundary faces carry the
//! homogeneous Dirichlet condition and are never assembled.

use alloc::vec::Vec;

use crate::{
    basis::{cell_dim, face_dim, Basis, CellBasis},
    hho::{build_all, HhoError, HybridVector, LocalOperators},
    linalg::{CsrMatrix, TripletBuilder},
    mesh::{Mesh, Point},
    quadrature::QuadratureFactory,
    DVector, Error, Result,
};

/// Numbering of the unknowns of `V_{h,0}^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    degree: usize,
    num_cell_dofs: usize,
    num_face_dofs: usize,
    cell_offsets: Vec<usize>,
    face_offsets: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let (nk, nf) = (cell_dim(k), face_dim(k));
        let cell_offsets: Vec<usize> = (0..=mesh.num_cells()).map(|c| c * nk).collect();
        let num_cell_dofs = mesh.num_cells() * nk;
        let mut next = num_cell_dofs;
        let face_offsets = (0..mesh.num_faces())
            .map(|f| {
                (!mesh.is_boundary_face(f)).then(|| {
                    let o = next;
                    next += nf;
                    o
                })
            })
            .collect();
        Self { degree: k, num_cell_dofs, num_face_dofs: next - num_cell_dofs, cell_offsets, face_offsets }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `N_K`.
    pub fn num_cell_dofs(&self) -> usize {
        self.num_cell_dofs
    }

    /// `N_F`, interior faces only.
    pub fn num_face_dofs(&self) -> usize {
        self.num_face_dofs
    }

    pub fn total(&self) -> usize {
        self.num_cell_dofs + self.num_face_dofs
    }

    /// One offset per cell followed by `N_K`.
    pub fn cell_offsets(&self) -> &[usize] {
        &self.cell_offsets
    }

    /// Global offset of a face block, `None` on the boundary.
    pub fn face_offset(&self, f: usize) -> Option<usize> {
        self.face_offsets[f]
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        self.face_offsets.iter().map(Option::is_none).collect()
    }

    /// Global index of every local unknown of cell `c`, `None` for boundary faces.
    pub fn local_indices(&self, mesh: &Mesh, c: usize) -> Vec<Option<usize>> {
        let (nk, nf) = (cell_dim(self.degree), face_dim(self.degree));
        let mut idx: Vec<Option<usize>> = (0..nk).map(|i| Some(self.cell_offsets[c] + i)).collect();
        for &f in mesh.cell_faces(c) {
            match self.face_offsets[f] {
                Some(o) => idx.extend((0..nf).map(|i| Some(o + i))),
                None => idx.extend((0..nf).map(|_| None)),
            }
        }
        idx
    }

    /// Global vector of a hybrid element; boundary face values are dropped.
    pub fn restrict(&self, v: &HybridVector) -> DVector {
        let nf = face_dim(self.degree);
        let mut out = DVector::zeros(self.total());
        out.rows_mut(0, self.num_cell_dofs).copy_from(&v.cells);
        for (f, o) in self.face_offsets.iter().enumerate() {
            if let Some(o) = o {
                out.rows_mut(*o, nf).copy_from(&v.faces.rows(f * nf, nf));
            }
        }
        out
    }

    /// Hybrid element of a global vector, with zero boundary faces.
    pub fn extend(&self, x: &DVector) -> HybridVector {
        let nf = face_dim(self.degree);
        let mut v = HybridVector {
            degree: self.degree,
            cells: x.rows(0, self.num_cell_dofs).into_owned(),
            faces: DVector::zeros(self.face_offsets.len() * nf),
        };
        for (f, o) in self.face_offsets.iter().enumerate() {
            if let Some(o) = o {
                v.faces.rows_mut(f * nf, nf).copy_from(&x.rows(*o, nf));
            }
        }
        v
    }

    /// Midpoint of the face of every face unknown, in face-block order;
    /// coordinates for geometric orderings of the condensed system.
    pub fn face_dof_points(&self, mesh: &Mesh) -> Vec<[f64; 2]> {
        let nf = face_dim(self.degree);
        let mut pts = Vec::with_capacity(self.num_face_dofs);
        for f in (0..mesh.num_faces()).filter(|&f| self.face_offsets[f].is_some()) {
            let m = mesh.face_midpoint(f);
            pts.extend((0..nf).map(|_| [m.x, m.y]));
        }
        pts
    }
}

/// Global mass and bilinear-form matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSystem {
    dofs: DofMap,
    /// `M_KK`, `N_K × N_K`.
    mass: CsrMatrix,
    /// `A`, `N × N` with cell unknowns first.
    stiffness: CsrMatrix,
}

impl GlobalSystem {
    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// `M_KK` padded with zero face rows and columns to `N × N`.
    pub fn mass_extended(&self) -> CsrMatrix {
        let n = self.dofs.total();
        self.mass.embed(n, n, 0, 0)
    }

    fn split(&self) -> (usize, usize) {
        (self.dofs.num_cell_dofs, self.dofs.total())
    }

    pub fn a_kk(&self) -> CsrMatrix {
        let (k, _) = self.split();
        self.stiffness.submatrix(0..k, 0..k)
    }

    pub fn a_kf(&self) -> CsrMatrix {
        let (k, n) = self.split();
        self.stiffness.submatrix(0..k, k..n)
    }

    pub fn a_fk(&self) -> CsrMatrix {
        let (k, n) = self.split();
        self.stiffness.submatrix(k..n, 0..k)
    }

    pub fn a_ff(&self) -> CsrMatrix {
        let (k, n) = self.split();
        self.stiffness.submatrix(k..n, k..n)
    }

    fn check(&self, v: &DVector) -> Result<()> {
        if v.len() != self.dofs.total() {
            return Err(Error::DimensionMismatch { expected: self.dofs.total(), actual: v.len() });
        }
        Ok(())
    }

    /// `√(vᵀ A v)`.
    pub fn energy_norm(&self, v: &DVector) -> Result<f64> {
        self.check(v)?;
        Ok(libm::sqrt(self.stiffness.quadratic_form(v).max(0.0)))
    }

    /// `√(v_Kᵀ M_KK v_K)`.
    pub fn l2_cell_norm(&self, v: &DVector) -> Result<f64> {
        self.check(v)?;
        let vk = v.rows(0, self.dofs.num_cell_dofs).into_owned();
        Ok(libm::sqrt(self.mass.quadratic_form(&vk).max(0.0)))
    }
}

/// Scatters the local operators into the global blocks. Cells are processed
/// in index order, so the result is bit-reproducible and `A` is exactly
/// symmetric.
pub fn assemble_global(mesh: &Mesh, k: usize, locals: &[LocalOperators]) -> GlobalSystem {
    assert_eq!(locals.len(), mesh.num_cells(), "one set of local operators per cell");
    let dofs = DofMap::new(mesh, k);
    let nk = cell_dim(k);
    let n = dofs.total();
    let nnz: usize = locals.iter().map(|l| l.bilinear.len()).sum();
    let mut a = TripletBuilder::with_capacity(n, n, nnz);
    let mut m = TripletBuilder::with_capacity(dofs.num_cell_dofs, dofs.num_cell_dofs, mesh.num_cells() * nk * nk);
    for (c, local) in locals.iter().enumerate() {
        let idx = dofs.local_indices(mesh, c);
        assert_eq!(idx.len(), local.bilinear.nrows(), "local operator size mismatch on cell {c}");
        for (j, gj) in idx.iter().enumerate() {
            let Some(gj) = gj else { continue };
            for (i, gi) in idx.iter().enumerate() {
                if let Some(gi) = gi {
                    a.push(*gi, *gj, local.bilinear[(i, j)]);
                }
            }
        }
        let o = dofs.cell_offsets[c];
        for j in 0..nk {
            for i in 0..nk {
                m.push(o + i, o + j, local.mass[(i, j)]);
            }
        }
    }
    GlobalSystem { dofs, mass: m.build(), stiffness: a.build() }
}

/// Default quadrature degree for loads.
pub fn load_quadrature_degree(k: usize) -> usize {
    2 * k + 2
}

/// Precomputed cell quadrature with weighted basis values, so that the load
/// `((f(·, t), φ_i)_K)` can be re-evaluated cheaply at every time level.
#[derive(Debug, Clone)]
pub struct LoadIntegrator {
    k: usize,
    points: Vec<Point>,
    // Per point, `w·φ_i` for every cell basis function.
    weighted: Vec<f64>,
    // Index ranges of each cell's points.
    cell_ptr: Vec<usize>,
}

impl LoadIntegrator {
    pub fn new(mesh: &Mesh, k: usize) -> Result<Self, HhoError> {
        Self::with_degree(mesh, k, load_quadrature_degree(k))
    }

    pub fn with_degree(mesh: &Mesh, k: usize, degree: usize) -> Result<Self, HhoError> {
        let factory = QuadratureFactory::new(degree);
        let nk = cell_dim(k);
        let mut points = Vec::new();
        let mut weighted = Vec::new();
        let mut cell_ptr = Vec::with_capacity(mesh.num_cells() + 1);
        cell_ptr.push(0);
        let mut vals = alloc::vec![0.0; nk];
        for c in 0..mesh.num_cells() {
            let rule = factory.cell(&mesh.cell_polygon(c)).map_err(|source| HhoError::Quadrature { cell: c, source })?;
            let basis = CellBasis::for_cell(mesh, c, k);
            for (p, w) in rule.iter() {
                basis.eval_into(p, &mut vals);
                points.push(*p);
                weighted.extend(vals.iter().map(|v| w * v));
            }
            cell_ptr.push(points.len());
        }
        Ok(Self { k, points, weighted, cell_ptr })
    }

    /// Cell moments of `f`, length `N_K`.
    pub fn assemble(&self, f: impl Fn(&Point) -> f64) -> DVector {
        let nk = cell_dim(self.k);
        let ncells = self.cell_ptr.len() - 1;
        let mut out = DVector::zeros(ncells * nk);
        for c in 0..ncells {
            let block = &mut out.as_mut_slice()[c * nk..(c + 1) * nk];
            for q in self.cell_ptr[c]..self.cell_ptr[c + 1] {
                let fv = f(&self.points[q]);
                if fv != 0.0 {
                    for (b, w) in block.iter_mut().zip(&self.weighted[q * nk..(q + 1) * nk]) {
                        *b += fv * w;
                    }
                }
            }
        }
        out
    }

    /// `‖f‖²` over the whole mesh with the same quadrature.
    pub fn l2_norm_squared(&self, f: impl Fn(&Point) -> f64) -> f64 {
        let nk = cell_dim(self.k);
        // The first basis function is the constant one, so its weighted
        // value is the quadrature weight itself.
        self.points.iter().enumerate().map(|(q, p)| self.weighted[q * nk] * { let v = f(p); v * v }).sum()
    }
}

/// Cell moments `((f(·, t), φ_i)_K)` of a space-time function at time `t`.
pub fn assemble_load(mesh: &Mesh, k: usize, f: impl Fn(&Point, f64) -> f64, t: f64) -> Result<DVector, HhoError> {
    Ok(LoadIntegrator::new(mesh, k)?.assemble(|p| f(p, t)))
}

/// Mesh, degree, local operators and global matrices of one discretization.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub k: usize,
    pub locals: Vec<LocalOperators>,
    pub system: GlobalSystem,
}

impl Discretization {
    pub fn new(mesh: Mesh, k: usize) -> Result<Self> {
        let locals = build_all(&mesh, k)?;
        let system = assemble_global(&mesh, k, &locals);
        Ok(Self { mesh, k, locals, system })
    }

    pub fn dofs(&self) -> &DofMap {
        self.system.dofs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, MeshFamily};

    #[test]
    fn two_triangle_counts() {
        let m = generate(MeshFamily::Triangular, 1, 0.0).unwrap();
        let d0 = DofMap::new(&m, 0);
        assert_eq!((d0.num_cell_dofs(), d0.num_face_dofs()), (2, 1));
        let d1 = DofMap::new(&m, 1);
        assert_eq!((d1.num_cell_dofs(), d1.num_face_dofs()), (6, 2));
        assert_eq!(d1.cell_offsets(), &[0, 3, 6]);
    }

    #[test]
    fn unit_load_gives_areas() {
        let m = generate(MeshFamily::Hexagonal, 3, 0.0).unwrap();
        let f = assemble_load(&m, 0, |_, _| 1.0, 0.0).unwrap();
        for c in 0..m.num_cells() {
            assert!((f[c] - m.cell_area(c)).abs() < 1e-14);
        }
        assert!(assemble_load(&m, 1, |_, _| 0.0, 0.3).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn restrict_extend_roundtrip() {
        let m = generate(MeshFamily::Triangular, 3, 0.0).unwrap();
        let d = DofMap::new(&m, 1);
        let x = DVector::from_fn(d.total(), |i, _| i as f64 * 0.5 - 3.0);
        assert_eq!(d.restrict(&d.extend(&x)), x);
    }

    #[test]
    fn exact_symmetry() {
        let m = generate(MeshFamily::DistortedQuad, 4, 0.3).unwrap();
        let disc = Discretization::new(m, 2).unwrap();
        assert_eq!(disc.system.stiffness().asymmetry(), 0.0);
        assert_eq!(disc.system.a_fk(), disc.system.a_kf().transpose());
    }
}
