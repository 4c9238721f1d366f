//! Sparse storage, factorizations and the statically condensed solver.

mod cg;
mod cholesky;
mod condense;
pub mod ordering;
mod sparse;

pub use cg::{conjugate_gradient, CgOptions, CgReport};
pub use cholesky::SparseCholesky;
pub use condense::{build_schur, factor_cell_blocks, Backend, CondensedSolver};
pub use ordering::Ordering;
pub use sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("cell block {cell} is not positive definite")]
    CellBlockNotSpd { cell: usize },
    #[error("conjugate gradient stopped after {iterations} iterations with relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix must be square, got {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },
}
