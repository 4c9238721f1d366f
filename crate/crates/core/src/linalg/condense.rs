//! Static condensation of cell unknowns.
//!
//! The global operator is ordered with all cell unknowns first, grouped in
//! contiguous per-cell blocks that couple only to themselves and to face
//! unknowns. Eliminating the cell blocks leaves the face Schur complement
//! `S_FF − Σ_K S_FK S_KK⁻¹ S_KF`.

use alloc::vec::Vec;

use nalgebra::Cholesky;

use super::{conjugate_gradient, CgOptions, CsrMatrix, LinalgError, Ordering, SparseCholesky, TripletBuilder};
use crate::{DMatrix, DVector};

/// Solver for the condensed face system.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Direct(Ordering),
    ConjugateGradient(CgOptions),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Direct(Ordering::default())
    }
}

/// Factored diagonal block of one cell and its coupling to face unknowns.
#[derive(Debug, Clone)]
pub struct CellBlock {
    offset: usize,
    factor: Cholesky<f64, nalgebra::Dyn>,
    /// Face unknowns (numbered from zero within the face block) coupled to the cell.
    faces: Vec<usize>,
    /// `L⁻¹ S_KF` with `S_KK = L Lᵀ`.
    y: DMatrix,
}

impl CellBlock {
    pub fn faces(&self) -> &[usize] {
        &self.faces
    }

    pub fn dim(&self) -> usize {
        self.y.nrows()
    }
}

fn factor_one(s: &CsrMatrix, n_cell: usize, cell: usize, range: core::ops::Range<usize>) -> Result<CellBlock, LinalgError> {
    let nk = range.len();
    let mut faces: Vec<usize> = Vec::new();
    for i in range.clone() {
        let (cols, _) = s.row(i);
        faces.extend(cols.iter().filter(|&&j| j >= n_cell).map(|&j| j - n_cell));
    }
    faces.sort_unstable();
    faces.dedup();
    let mut kk = DMatrix::zeros(nk, nk);
    let mut kf = DMatrix::zeros(nk, faces.len());
    for (a, i) in range.clone().enumerate() {
        let (cols, vals) = s.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if range.contains(&j) {
                kk[(a, j - range.start)] = v;
            } else if j >= n_cell {
                let b = faces.binary_search(&(j - n_cell)).unwrap();
                kf[(a, b)] = v;
            }
        }
    }
    let factor = Cholesky::new(kk).ok_or(LinalgError::CellBlockNotSpd { cell })?;
    let mut y = kf;
    factor.l_dirty().solve_lower_triangular_mut(&mut y);
    Ok(CellBlock { offset: range.start, factor, faces, y })
}

/// Dense Cholesky factors of every cell block. `cell_offsets` has one entry
/// per cell plus a final entry equal to the number of cell unknowns.
pub fn factor_cell_blocks(s: &CsrMatrix, cell_offsets: &[usize]) -> Result<Vec<CellBlock>, LinalgError> {
    let n_cell = *cell_offsets.last().unwrap_or(&0);
    let cells = cell_offsets.len().saturating_sub(1);
    let one = |c: usize| factor_one(s, n_cell, c, cell_offsets[c]..cell_offsets[c + 1]);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cells).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cells).map(one).collect()
    }
}

/// The face Schur complement. Each cell contributes `−YᵀY` with
/// `Y = L⁻¹ S_KF`, which keeps the result exactly symmetric whenever the
/// face block of `s` is.
pub fn build_schur(s: &CsrMatrix, n_cell: usize, blocks: &[CellBlock]) -> CsrMatrix {
    let n = s.nrows();
    let ff = s.submatrix(n_cell..n, n_cell..n);
    let extra: usize = blocks.iter().map(|b| b.faces.len() * b.faces.len()).sum();
    let mut t = TripletBuilder::with_capacity(n - n_cell, n - n_cell, ff.nnz() + extra);
    for (i, j, v) in ff.triplets() {
        t.push(i, j, v);
    }
    for b in blocks {
        let g = b.y.tr_mul(&b.y);
        for (p, &fi) in b.faces.iter().enumerate() {
            for (q, &fj) in b.faces.iter().enumerate() {
                t.push(fi, fj, -g[(p, q)]);
            }
        }
    }
    t.build()
}

#[derive(Debug, Clone)]
enum FaceSolver {
    Direct(SparseCholesky),
    Iterative(CgOptions),
}

/// Solves `S x = t` by eliminating cell unknowns. The factorizations are
/// computed once and reused for every right-hand side.
#[derive(Debug, Clone)]
pub struct CondensedSolver {
    n_cell: usize,
    blocks: Vec<CellBlock>,
    schur: CsrMatrix,
    solver: FaceSolver,
}

impl CondensedSolver {
    pub fn new(s: &CsrMatrix, cell_offsets: &[usize], backend: Backend) -> Result<Self, LinalgError> {
        if s.nrows() != s.ncols() {
            return Err(LinalgError::NotSquare { nrows: s.nrows(), ncols: s.ncols() });
        }
        let n_cell = *cell_offsets.last().unwrap_or(&0);
        if n_cell > s.nrows() {
            return Err(LinalgError::DimensionMismatch { expected: s.nrows(), actual: n_cell });
        }
        let blocks = factor_cell_blocks(s, cell_offsets)?;
        let schur = build_schur(s, n_cell, &blocks);
        let solver = match backend {
            Backend::Direct(ordering) => FaceSolver::Direct(SparseCholesky::factor(&schur, &ordering)?),
            Backend::ConjugateGradient(opts) => FaceSolver::Iterative(opts),
        };
        Ok(Self { n_cell, blocks, schur, solver })
    }

    pub fn schur(&self) -> &CsrMatrix {
        &self.schur
    }

    pub fn num_cell_unknowns(&self) -> usize {
        self.n_cell
    }

    pub fn num_face_unknowns(&self) -> usize {
        self.schur.nrows()
    }

    /// Condensed right-hand side `t_F − Σ_K S_FK S_KK⁻¹ t_K`.
    pub fn condense_rhs(&self, t_cell: &DVector, t_face: &DVector) -> Result<DVector, LinalgError> {
        self.check(t_cell, t_face)?;
        let mut rhs = t_face.clone();
        for b in &self.blocks {
            let mut g = t_cell.rows(b.offset, b.dim()).into_owned();
            b.factor.l_dirty().solve_lower_triangular_mut(&mut g);
            let contrib = b.y.tr_mul(&g);
            for (p, &f) in b.faces.iter().enumerate() {
                rhs[f] -= contrib[p];
            }
        }
        Ok(rhs)
    }

    /// Cell unknowns from face unknowns: `x_K = S_KK⁻¹ (t_K − S_KF x_F)`.
    pub fn recover_cells(&self, t_cell: &DVector, x_face: &DVector) -> DVector {
        let mut x = DVector::zeros(self.n_cell);
        for b in &self.blocks {
            let xf = DVector::from_iterator(b.faces.len(), b.faces.iter().map(|&f| x_face[f]));
            let mut g = t_cell.rows(b.offset, b.dim()).into_owned();
            b.factor.l_dirty().solve_lower_triangular_mut(&mut g);
            g -= &b.y * xf;
            b.factor.l_dirty().tr_solve_lower_triangular_mut(&mut g);
            x.rows_mut(b.offset, b.dim()).copy_from(&g);
        }
        x
    }

    /// Returns `(x_cell, x_face)`.
    pub fn solve(&self, t_cell: &DVector, t_face: &DVector) -> Result<(DVector, DVector), LinalgError> {
        let rhs = self.condense_rhs(t_cell, t_face)?;
        let x_face = match &self.solver {
            FaceSolver::Direct(chol) => chol.solve(&rhs)?,
            FaceSolver::Iterative(opts) => conjugate_gradient(&self.schur, &rhs, None, *opts)?.0,
        };
        Ok((self.recover_cells(t_cell, &x_face), x_face))
    }

    fn check(&self, t_cell: &DVector, t_face: &DVector) -> Result<(), LinalgError> {
        if t_cell.len() != self.n_cell {
            return Err(LinalgError::DimensionMismatch { expected: self.n_cell, actual: t_cell.len() });
        }
        if t_face.len() != self.schur.nrows() {
            return Err(LinalgError::DimensionMismatch { expected: self.schur.nrows(), actual: t_face.len() });
        }
        Ok(())
    }
}
