use super::{CsrMatrix, LinalgError};
use crate::DVector;

/// Stopping rule for [`conjugate_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual `‖b − Ax‖ / ‖b‖` at which iteration stops.
    pub tol: f64,
    /// Defaults to ten times the system size.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite `a`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &DVector,
    x0: Option<&DVector>,
    options: CgOptions,
) -> Result<(DVector, CgReport), LinalgError> {
    let n = a.nrows();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, actual: b.len() });
    }
    let bnorm = b.norm();
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    if bnorm == 0.0 {
        return Ok((DVector::zeros(n), CgReport { iterations: 0, residual: 0.0 }));
    }
    let inv_diag = a.diagonal().map(|d| if d > 0.0 { 1.0 / d } else { 1.0 });
    let mut r = b - a.mul_vec(&x);
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    let max_iter = options.max_iter.unwrap_or(10 * n.max(1));
    let mut residual = r.norm() / bnorm;
    for it in 0..max_iter {
        if residual <= options.tol {
            return Ok((x, CgReport { iterations: it, residual }));
        }
        a.mul_vec_into(p.as_slice(), ap.as_mut_slice());
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        residual = r.norm() / bnorm;
        z = r.component_mul(&inv_diag);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    if residual <= options.tol {
        Ok((x, CgReport { iterations: max_iter, residual }))
    } else {
        Err(LinalgError::NoConvergence { iterations: max_iter, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DMatrix;

    #[test]
    fn solves_small_spd() {
        let d = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let a = CsrMatrix::from_dense(&d);
        let b = DVector::from_vec(alloc::vec![1.0, 2.0, 3.0]);
        let (x, rep) = conjugate_gradient(&a, &b, None, CgOptions::default()).unwrap();
        assert!((d * x - b).amax() < 1e-11);
        assert!(rep.iterations <= 4);
    }

    #[test]
    fn iteration_cap() {
        let d = DMatrix::from_fn(20, 20, |i, j| if i == j { 2.0 + i as f64 } else { 1.0 / (1.0 + (i + j) as f64) });
        let a = CsrMatrix::from_dense(&d);
        let b = DVector::from_element(20, 1.0);
        let err = conjugate_gradient(&a, &b, None, CgOptions { tol: 1e-14, max_iter: Some(1) }).unwrap_err();
        assert!(matches!(err, LinalgError::NoConvergence { iterations: 1, .. }));
    }
}
