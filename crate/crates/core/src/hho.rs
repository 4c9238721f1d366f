//! Local HHO operators.
//!
//! On a cell `K` with faces `F_1 < … < F_m` the local unknowns are ordered
//! cell coefficients first, then each face block in ascending global face
//! index ([`LocalDofLayout`]).
//!
//! The potential reconstruction `R q̂ ∈ P_{k+1}(K)` solves
//!
//! ```text
//! (∇R q̂, ∇w)_K = (∇q_K, ∇w)_K + Σ_F ⟨q_F − q_K, n_KF·∇w⟩_F   ∀w ∈ P_{k+1}(K)
//! (R q̂, 1)_K   = (q_K, 1)_K
//! ```
//!
//! The Neumann system is solved with the constant coefficient pinned, and
//! the constant is restored from the mean condition afterwards. The
//! stabilization is the equal-order form
//! `s_K(q̂, r̂) = Σ_F h_F⁻¹ ⟨(δ_KF − δ_K)q̂, (δ_KF − δ_K)r̂⟩_F` with
//! `δ_K = π_K(R q̂ − q_K)` and `δ_KF = π_F(R q̂ − q_F)`.

use alloc::vec::Vec;

use crate::{
    basis::{cell_dim, face_dim, gram_matrix, stiffness_matrix, Basis, CellBasis, FaceBasis},
    mesh::{Mesh, Point, Vector},
    quadrature::{QuadratureError, QuadratureFactory, QuadratureRule},
    DMatrix, DVector,
};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HhoError {
    #[error("polynomial degree {0} is not supported (maximum {MAX_DEGREE})")]
    UnsupportedDegree(usize),
    #[error("cell {cell}: {source}")]
    Quadrature { cell: usize, source: QuadratureError },
    #[error("cell {cell}: reconstruction stiffness is singular beyond the constant mode")]
    RankDeficient { cell: usize },
    #[error("cell {cell}: singular Gram matrix")]
    SingularGram { cell: usize },
}

/// Cell-then-faces ordering of the local unknowns of one cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDofLayout {
    pub cell_dofs: usize,
    pub face_dofs: usize,
    pub faces: Vec<usize>,
}

impl LocalDofLayout {
    pub fn new(mesh: &Mesh, cell: usize, k: usize) -> Self {
        Self { cell_dofs: cell_dim(k), face_dofs: face_dim(k), faces: mesh.cell_faces(cell).to_vec() }
    }

    pub fn total(&self) -> usize {
        self.cell_dofs + self.faces.len() * self.face_dofs
    }

    /// First local index of the `i`-th face block.
    pub fn face_offset(&self, i: usize) -> usize {
        self.cell_dofs + i * self.face_dofs
    }
}

/// Element of `V_h^k` with every face present (boundary faces included).
#[derive(Debug, Clone, PartialEq)]
pub struct HybridVector {
    pub degree: usize,
    pub cells: DVector,
    pub faces: DVector,
}

impl HybridVector {
    pub fn zeros(mesh: &Mesh, k: usize) -> Self {
        Self {
            degree: k,
            cells: DVector::zeros(mesh.num_cells() * cell_dim(k)),
            faces: DVector::zeros(mesh.num_faces() * face_dim(k)),
        }
    }

    pub fn cell_block(&self, c: usize) -> &[f64] {
        let n = cell_dim(self.degree);
        &self.cells.as_slice()[c * n..(c + 1) * n]
    }

    pub fn face_block(&self, f: usize) -> &[f64] {
        let n = face_dim(self.degree);
        &self.faces.as_slice()[f * n..(f + 1) * n]
    }

    /// Local vector of cell `c` in [`LocalDofLayout`] order.
    pub fn local(&self, mesh: &Mesh, c: usize) -> DVector {
        let nk = cell_dim(self.degree);
        let nf = face_dim(self.degree);
        let faces = mesh.cell_faces(c);
        let mut v = DVector::zeros(nk + faces.len() * nf);
        v.as_mut_slice()[..nk].copy_from_slice(self.cell_block(c));
        for (i, &f) in faces.iter().enumerate() {
            v.as_mut_slice()[nk + i * nf..nk + (i + 1) * nf].copy_from_slice(self.face_block(f));
        }
        v
    }

    /// Sets every boundary face block to zero, mapping into `V_{h,0}^k`.
    pub fn zero_boundary(&mut self, mesh: &Mesh) {
        let nf = face_dim(self.degree);
        for f in (0..mesh.num_faces()).filter(|&f| mesh.is_boundary_face(f)) {
            self.faces.as_mut_slice()[f * nf..(f + 1) * nf].fill(0.0);
        }
    }
}

/// Per-cell matrices of the discrete bilinear form.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperators {
    pub layout: LocalDofLayout,
    /// Local unknowns to `P_{k+1}(K)` coefficients.
    pub reconstruction: DMatrix,
    /// `(∇R·, ∇R·)_K`.
    pub consistency: DMatrix,
    pub stabilization: DMatrix,
    /// Cell mass matrix of `P_k(K)`.
    pub mass: DMatrix,
    /// `consistency + stabilization`.
    pub bilinear: DMatrix,
}

/// Quadrature degree used for all local products.
pub fn local_quadrature_degree(k: usize) -> usize {
    2 * k + 2
}

pub(crate) struct FaceData {
    pub index: usize,
    pub normal: Vector,
    pub length: f64,
    pub basis: FaceBasis,
    pub rule: QuadratureRule,
}

/// Geometry, bases and rules of one cell, built once per cell.
pub(crate) struct CellData {
    pub cell: usize,
    pub k: usize,
    /// Degree-`k+1` basis; its first `dim P_k` functions are the cell basis.
    pub basis: CellBasis,
    pub rule: QuadratureRule,
    pub faces: Vec<FaceData>,
}

impl CellData {
    pub fn new(mesh: &Mesh, cell: usize, k: usize, factory: &QuadratureFactory) -> Result<Self, HhoError> {
        if k > MAX_DEGREE {
            return Err(HhoError::UnsupportedDegree(k));
        }
        let quad = |source| HhoError::Quadrature { cell, source };
        let rule = factory.cell(&mesh.cell_polygon(cell)).map_err(quad)?;
        let faces = mesh
            .cell_faces(cell)
            .iter()
            .zip(mesh.cell_normals(cell))
            .map(|(&f, n)| {
                let (a, b) = mesh.face_endpoints(f);
                Ok(FaceData {
                    index: f,
                    normal: *n,
                    length: mesh.face_length(f),
                    basis: FaceBasis::new(&a, &b, k),
                    rule: factory.edge(&a, &b).map_err(quad)?,
                })
            })
            .collect::<Result<Vec<_>, HhoError>>()?;
        Ok(Self { cell, k, basis: CellBasis::for_cell(mesh, cell, k + 1), rule, faces })
    }

    fn layout(&self) -> LocalDofLayout {
        LocalDofLayout {
            cell_dofs: cell_dim(self.k),
            face_dofs: face_dim(self.k),
            faces: self.faces.iter().map(|f| f.index).collect(),
        }
    }
}

struct Reconstruction {
    r: DMatrix,
    stiffness: DMatrix,
    mass: DMatrix,
}

fn reconstruct(data: &CellData) -> Result<Reconstruction, HhoError> {
    let k = data.k;
    let (nk, nf, nr) = (cell_dim(k), face_dim(k), cell_dim(k + 1));
    let ndof = nk + data.faces.len() * nf;
    let stiffness = stiffness_matrix(&data.basis, &data.rule);
    let mass = gram_matrix(&data.basis, &data.rule);

    // Right-hand side: rows are test functions w ∈ P_{k+1}, columns local unknowns.
    let mut rhs = DMatrix::zeros(nr, ndof);
    rhs.view_mut((0, 0), (nr, nk)).copy_from(&stiffness.view((0, 0), (nr, nk)));
    let mut grads = alloc::vec![Vector::zeros(); nr];
    let mut phi = alloc::vec![0.0; nr];
    let mut psi = alloc::vec![0.0; nf];
    for (i, face) in data.faces.iter().enumerate() {
        let off = nk + i * nf;
        for (p, w) in face.rule.iter() {
            data.basis.grad_into(p, &mut grads);
            data.basis.eval_into(p, &mut phi);
            face.basis.eval_into(p, &mut psi);
            for (row, g) in grads.iter().enumerate() {
                let gn = w * g.dot(&face.normal);
                for j in 0..nk {
                    rhs[(row, j)] -= gn * phi[j];
                }
                for l in 0..nf {
                    rhs[(row, off + l)] += gn * psi[l];
                }
            }
        }
    }

    let reduced = stiffness.view((1, 1), (nr - 1, nr - 1)).clone_owned();
    let chol = reduced.cholesky().ok_or(HhoError::RankDeficient { cell: data.cell })?;
    let x = chol.solve(&rhs.rows(1, nr - 1).clone_owned());
    let mut r = DMatrix::zeros(nr, ndof);
    r.rows_mut(1, nr - 1).copy_from(&x);
    let area = mass[(0, 0)];
    for j in 0..ndof {
        let shifted: f64 = (1..nr).map(|i| mass[(0, i)] * x[(i - 1, j)]).sum();
        let cell_mean = if j < nk { mass[(0, j)] } else { 0.0 };
        r[(0, j)] = (cell_mean - shifted) / area;
    }
    Ok(Reconstruction { r, stiffness, mass })
}

fn symmetrize(m: &mut DMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn stabilize(data: &CellData, rec: &Reconstruction) -> Result<DMatrix, HhoError> {
    let k = data.k;
    let (nk, nf, nr) = (cell_dim(k), face_dim(k), cell_dim(k + 1));
    let ndof = rec.r.ncols();
    let singular = HhoError::SingularGram { cell: data.cell };

    // δ_K as a matrix: π_K(R q̂) − q_K, in P_k(K) coefficients.
    let mkk = rec.mass.view((0, 0), (nk, nk)).clone_owned().cholesky().ok_or(singular.clone())?;
    let mut delta_cell = mkk.solve(&(rec.mass.rows(0, nk) * &rec.r));
    for i in 0..nk {
        delta_cell[(i, i)] -= 1.0;
    }

    let mut stab = DMatrix::zeros(ndof, ndof);
    let mut phi = alloc::vec![0.0; nr];
    let mut psi = alloc::vec![0.0; nf];
    for (i, face) in data.faces.iter().enumerate() {
        let off = nk + i * nf;
        let mff = gram_matrix(&face.basis, &face.rule).cholesky().ok_or(singular.clone())?;
        let mut trace = DMatrix::zeros(nf, nr);
        for (p, w) in face.rule.iter() {
            face.basis.eval_into(p, &mut psi);
            data.basis.eval_into(p, &mut phi);
            for l in 0..nf {
                for j in 0..nr {
                    trace[(l, j)] += w * psi[l] * phi[j];
                }
            }
        }
        // δ_KF as a matrix: π_F(R q̂) − q_F, in P_k(F) coefficients.
        let mut delta_face = mff.solve(&(trace * &rec.r));
        for l in 0..nf {
            delta_face[(l, off + l)] -= 1.0;
        }
        // δ_KF − δ_K evaluated pointwise on F; the trace of δ_K is exact.
        let mut z = DVector::zeros(ndof);
        for (p, w) in face.rule.iter() {
            face.basis.eval_into(p, &mut psi);
            data.basis.eval_into(p, &mut phi);
            z.fill(0.0);
            for l in 0..nf {
                z.axpy(psi[l], &delta_face.row(l).transpose(), 1.0);
            }
            for j in 0..nk {
                z.axpy(-phi[j], &delta_cell.row(j).transpose(), 1.0);
            }
            stab.ger(w / face.length, &z, &z, 1.0);
        }
    }
    symmetrize(&mut stab);
    Ok(stab)
}

pub(crate) fn build_with(
    mesh: &Mesh,
    cell: usize,
    k: usize,
    factory: &QuadratureFactory,
) -> Result<LocalOperators, HhoError> {
    let data = CellData::new(mesh, cell, k, factory)?;
    let rec = reconstruct(&data)?;
    let stabilization = stabilize(&data, &rec)?;
    let mut consistency = rec.r.transpose() * &rec.stiffness * &rec.r;
    symmetrize(&mut consistency);
    let nk = cell_dim(k);
    let mass = rec.mass.view((0, 0), (nk, nk)).clone_owned();
    let bilinear = &consistency + &stabilization;
    Ok(LocalOperators { layout: data.layout(), reconstruction: rec.r, consistency, stabilization, mass, bilinear })
}

impl LocalOperators {
    pub fn build(mesh: &Mesh, cell: usize, k: usize) -> Result<Self, HhoError> {
        build_with(mesh, cell, k, &QuadratureFactory::new(local_quadrature_degree(k)))
    }

    /// `b_K(q̂, q̂)` for a local vector.
    pub fn local_energy(&self, v: &DVector) -> f64 {
        v.dot(&(&self.bilinear * v))
    }
}

/// Local operators for every cell, in cell order.
pub fn build_all(mesh: &Mesh, k: usize) -> Result<Vec<LocalOperators>, HhoError> {
    let factory = QuadratureFactory::new(local_quadrature_degree(k));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..mesh.num_cells()).into_par_iter().map(|c| build_with(mesh, c, k, &factory)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..mesh.num_cells()).map(|c| build_with(mesh, c, k, &factory)).collect()
    }
}

/// Reconstruction matrix and consistency matrix `Rᵀ K R` of one cell.
pub fn potential_reconstruction(mesh: &Mesh, cell: usize, k: usize) -> Result<(DMatrix, DMatrix), HhoError> {
    let factory = QuadratureFactory::new(local_quadrature_degree(k));
    let data = CellData::new(mesh, cell, k, &factory)?;
    let rec = reconstruct(&data)?;
    let mut a = rec.r.transpose() * &rec.stiffness * &rec.r;
    symmetrize(&mut a);
    Ok((rec.r, a))
}

/// Stabilization matrix of one cell for a given reconstruction `r`.
pub fn stabilization_matrix(mesh: &Mesh, cell: usize, k: usize, r: &DMatrix) -> Result<DMatrix, HhoError> {
    let factory = QuadratureFactory::new(local_quadrature_degree(k));
    let data = CellData::new(mesh, cell, k, &factory)?;
    let stiffness = stiffness_matrix(&data.basis, &data.rule);
    let mass = gram_matrix(&data.basis, &data.rule);
    stabilize(&data, &Reconstruction { r: r.clone(), stiffness, mass })
}

fn project<B: Basis>(basis: &B, rule: &QuadratureRule, v: impl Fn(&Point) -> f64) -> Option<DVector> {
    let gram = gram_matrix(basis, rule);
    let mut moments = DVector::zeros(basis.dim());
    let mut vals = alloc::vec![0.0; basis.dim()];
    for (p, w) in rule.iter() {
        basis.eval_into(p, &mut vals);
        let fv = w * v(p);
        for (m, b) in moments.iter_mut().zip(&vals) {
            *m += fv * b;
        }
    }
    Some(gram.cholesky()?.solve(&moments))
}

/// `π_K^k v`, with a quadrature of degree `2k + 2`.
pub fn l2_project_cell(mesh: &Mesh, cell: usize, k: usize, v: impl Fn(&Point) -> f64) -> Result<DVector, HhoError> {
    let rule = QuadratureFactory::new(local_quadrature_degree(k))
        .cell(&mesh.cell_polygon(cell))
        .map_err(|source| HhoError::Quadrature { cell, source })?;
    project(&CellBasis::for_cell(mesh, cell, k), &rule, v).ok_or(HhoError::SingularGram { cell })
}

/// `π_F^k v`, with a quadrature of degree `2k + 2`.
pub fn l2_project_face(mesh: &Mesh, face: usize, k: usize, v: impl Fn(&Point) -> f64) -> Result<DVector, HhoError> {
    let (a, b) = mesh.face_endpoints(face);
    let cell = mesh.faces()[face].left;
    let rule = QuadratureFactory::new(local_quadrature_degree(k))
        .edge(&a, &b)
        .map_err(|source| HhoError::Quadrature { cell, source })?;
    project(&FaceBasis::new(&a, &b, k), &rule, v).ok_or(HhoError::SingularGram { cell })
}

/// `Î_h^k v`: cell and face L² projections on every cell and face.
pub fn interpolate(mesh: &Mesh, k: usize, v: impl Fn(&Point) -> f64) -> Result<HybridVector, HhoError> {
    let factory = QuadratureFactory::new(local_quadrature_degree(k));
    let mut out = HybridVector::zeros(mesh, k);
    let (nk, nf) = (cell_dim(k), face_dim(k));
    for c in 0..mesh.num_cells() {
        let rule = factory.cell(&mesh.cell_polygon(c)).map_err(|source| HhoError::Quadrature { cell: c, source })?;
        let coeffs = project(&CellBasis::for_cell(mesh, c, k), &rule, &v).ok_or(HhoError::SingularGram { cell: c })?;
        out.cells.rows_mut(c * nk, nk).copy_from(&coeffs);
    }
    for f in 0..mesh.num_faces() {
        let (a, b) = mesh.face_endpoints(f);
        let cell = mesh.faces()[f].left;
        let rule = factory.edge(&a, &b).map_err(|source| HhoError::Quadrature { cell, source })?;
        let coeffs = project(&FaceBasis::new(&a, &b, k), &rule, &v).ok_or(HhoError::SingularGram { cell })?;
        out.faces.rows_mut(f * nf, nf).copy_from(&coeffs);
    }
    Ok(out)
}

/// `Î_h^k v` followed by zeroing the boundary faces (the `V_{h,0}^k` variant).
pub fn interpolate_homogeneous(mesh: &Mesh, k: usize, v: impl Fn(&Point) -> f64) -> Result<HybridVector, HhoError> {
    let mut out = interpolate(mesh, k, v)?;
    out.zero_boundary(mesh);
    Ok(out)
}

/// Elliptic projection `E_K^{k+1} v ∈ P_{k+1}(K)`:
/// `(∇(E v − v), ∇w)_K = 0` for all `w ∈ P_{k+1}(K)` and `(E v − v, 1)_K = 0`.
///
/// The gradient of `v` is never needed: `(∇v, ∇w)_K` is evaluated as
/// `−(v, Δw)_K + Σ_F (v, n·∇w)_F`, with rules exact for `v ∈ P_{k+3}`.
pub fn elliptic_project(mesh: &Mesh, cell: usize, k: usize, v: impl Fn(&Point) -> f64) -> Result<DVector, HhoError> {
    let factory = QuadratureFactory::new(local_quadrature_degree(k) + 2);
    let data = CellData::new(mesh, cell, k, &factory)?;
    let nr = cell_dim(k + 1);
    let stiffness = stiffness_matrix(&data.basis, &data.rule);
    let mut rhs = DVector::zeros(nr);
    let mut mean = DVector::zeros(nr);
    let mut lap = alloc::vec![0.0; nr];
    let mut phi = alloc::vec![0.0; nr];
    let mut integral = 0.0;
    for (p, w) in data.rule.iter() {
        let val = v(p);
        data.basis.laplacian_into(p, &mut lap);
        data.basis.eval_into(p, &mut phi);
        integral += w * val;
        for i in 0..nr {
            rhs[i] -= w * val * lap[i];
            mean[i] += w * phi[i];
        }
    }
    let mut grads = alloc::vec![Vector::zeros(); nr];
    for face in &data.faces {
        for (p, w) in face.rule.iter() {
            let val = v(p);
            data.basis.grad_into(p, &mut grads);
            for (r, g) in rhs.iter_mut().zip(&grads) {
                *r += w * val * g.dot(&face.normal);
            }
        }
    }
    // Non-constant part from the reduced Neumann system, constant from the mean.
    let reduced = stiffness.view((1, 1), (nr - 1, nr - 1)).clone_owned();
    let x = reduced.cholesky().ok_or(HhoError::RankDeficient { cell })?.solve(&rhs.rows(1, nr - 1).into_owned());
    let mut out = DVector::zeros(nr);
    out.rows_mut(1, nr - 1).copy_from(&x);
    out[0] = (integral - (1..nr).map(|i| mean[i] * x[i - 1]).sum::<f64>()) / mean[0];
    Ok(out)
}

/// `⦀q̂⦀² = Σ_K (‖∇q_K‖²_K + Σ_F h_F⁻¹ ‖q_F − q_K‖²_F)`, squared.
pub fn hho_norm_squared(mesh: &Mesh, v: &HybridVector) -> Result<f64, HhoError> {
    let k = v.degree;
    let factory = QuadratureFactory::new(local_quadrature_degree(k));
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let quad = |source| HhoError::Quadrature { cell: c, source };
        let basis = CellBasis::for_cell(mesh, c, k);
        let qk = v.cell_block(c);
        let rule = factory.cell(&mesh.cell_polygon(c)).map_err(quad)?;
        total += rule.integrate(|p| basis.grad_poly(qk, p).norm_squared());
        for &f in mesh.cell_faces(c) {
            let (a, b) = mesh.face_endpoints(f);
            let fb = FaceBasis::new(&a, &b, k);
            let qf = v.face_block(f);
            let rule = factory.edge(&a, &b).map_err(quad)?;
            let jump = rule.integrate(|p| {
                let d = fb.eval_poly(qf, p) - basis.eval_poly(qk, p);
                d * d
            });
            total += jump / mesh.face_length(f);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, MeshFamily};

    fn poly(p: &Point) -> f64 {
        // Degree 2.
        1.0 + 2.0 * p.x - p.y + 3.0 * p.x * p.y - p.y * p.y
    }

    #[test]
    fn projection_reproduces_constants() {
        let m = generate(MeshFamily::Hexagonal, 3, 0.0).unwrap();
        for k in 0..=2 {
            let c = l2_project_cell(&m, 4, k, |_| 1.0).unwrap();
            assert!((c[0] - 1.0).abs() < 1e-13);
            assert!(c.rows(1, c.len() - 1).amax() < 1e-12);
            let f = l2_project_face(&m, 2, k, |_| 1.0).unwrap();
            assert!((f[0] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn reconstruction_of_constant() {
        let m = generate(MeshFamily::DistortedQuad, 3, 0.4).unwrap();
        let k = 1;
        let ops = LocalOperators::build(&m, 5, k).unwrap();
        let iv = interpolate(&m, k, |_| 2.5).unwrap();
        let rq = &ops.reconstruction * iv.local(&m, 5);
        assert!((rq[0] - 2.5).abs() < 1e-12);
        assert!(rq.rows(1, rq.len() - 1).amax() < 1e-11);
    }

    #[test]
    fn stabilization_kills_polynomials_and_sees_jumps() {
        let m = generate(MeshFamily::Hexagonal, 2, 0.0).unwrap();
        for k in 0..=2 {
            for c in 0..m.num_cells() {
                let ops = LocalOperators::build(&m, c, k).unwrap();
                // poly has degree 2 ≤ k + 1 for k ≥ 1.
                if k >= 1 {
                    let q = interpolate(&m, k, poly).unwrap().local(&m, c);
                    assert!(q.dot(&(&ops.stabilization * &q)).abs() < 1e-11, "k={k} cell={c}");
                }
                let mut jump = DVector::zeros(ops.layout.total());
                jump[ops.layout.face_offset(0)] = 1.0;
                assert!(jump.dot(&(&ops.stabilization * &jump)) > 0.0);
            }
        }
    }

    #[test]
    fn rejects_high_degree() {
        let m = generate(MeshFamily::Triangular, 1, 0.0).unwrap();
        assert_eq!(LocalOperators::build(&m, 0, 5).unwrap_err(), HhoError::UnsupportedDegree(5));
    }
}
