use crate::{analysis::AnalysisError, hho::HhoError, linalg::LinalgError, mesh::MeshError};
use crate::quadrature::QuadratureError;

/// Top-level error for pipelines that cross module boundaries.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Hho(#[from] HhoError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("time step {step}: {source}")]
    Step { step: usize, source: LinalgError },
    #[error("invalid time grid: final time {final_time}, step {tau}")]
    InvalidTimeGrid { final_time: f64, tau: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
