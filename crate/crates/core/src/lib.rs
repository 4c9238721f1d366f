//! Equal-order hybrid high-order (HHO) discretization of the parabolic
//! integro-differential equation
//!
//! ```text
//! p_t - Δp - ∫₀ᵗ Δp ds = f   in Ω × (0, T],    p = 0 on ∂Ω,    p(·, 0) = g
//! ```
//!
//! on general polygonal meshes, with Crank–Nicolson time stepping, a
//! composite trapezoidal rule for the memory integral, and static
//! condensation of the cell unknowns at every step.
//!
//! The crate is `no_std` (it only needs `alloc`). Enable the `std` feature
//! for `std::error::Error` integration, and `parallel` for rayon-backed
//! per-cell operator construction.
//!
//! Layout:
//!
//! - [`mesh`]: polygonal meshes, topology, generators for the triangular,
//!   distorted-quadrilateral and hexagonal families.
//! - [`quadrature`]: Gauss–Legendre rules on edges and fan-triangulated
//!   polygons.
//! - [`basis`]: scaled monomial bases on cells and faces.
//! - [`hho`]: projectors, potential reconstruction, stabilization and the
//!   local bilinear form.
//! - [`assembly`]: global numbering with Dirichlet elimination, sparse
//!   block assembly, loads and discrete norms.
//! - [`linalg`]: sparse storage, sparse Cholesky, conjugate gradients and the
//!   Schur-complement solver.
//! - [`timeloop`]: the fully discrete scheme with an O(1) memory
//!   accumulator.
//! - [`analysis`]: manufactured solutions, error norms, convergence orders
//!   and convergence studies.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod analysis;
pub mod assembly;
pub mod basis;
mod error;
pub mod hho;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod timeloop;

pub use error::{Error, Result};

/// Dense column-major matrix used for every local operator.
pub type DMatrix = nalgebra::DMatrix<f64>;
/// Dense vector used for coefficient blocks and global dof vectors.
pub type DVector = nalgebra::DVector<f64>;
