//! Up-looking sparse Cholesky factorization `P A Pᵀ = L Lᵀ`.
//!
//! The symbolic phase computes the elimination tree and the exact column
//! counts of `L` from row subtrees; the numeric phase computes one row of `L`
//! per step by a sparse triangular solve over the row's reach in the tree.

use alloc::{vec, vec::Vec};

use super::{ordering::invert, CsrMatrix, LinalgError, Ordering};
use crate::DVector;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    // L in compressed columns, diagonal entry first in each column.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Upper triangle of `P A Pᵀ` in compressed columns.
fn permuted_upper(a: &CsrMatrix, pinv: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = a.nrows();
    let mut count = vec![0usize; n + 1];
    for (i, j, _) in a.triplets() {
        let (pi, pj) = (pinv[i], pinv[j]);
        if pi <= pj {
            count[pj + 1] += 1;
        }
    }
    for j in 0..n {
        count[j + 1] += count[j];
    }
    let ptr = count.clone();
    let mut next = count;
    let mut rows = vec![0; ptr[n]];
    let mut vals = vec![0.0; ptr[n]];
    for (i, j, v) in a.triplets() {
        let (pi, pj) = (pinv[i], pinv[j]);
        if pi <= pj {
            rows[next[pj]] = pi;
            vals[next[pj]] = v;
            next[pj] += 1;
        }
    }
    (ptr, rows, vals)
}

fn etree(n: usize, ptr: &[usize], rows: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &r in &rows[ptr[k]..ptr[k + 1]] {
            let mut i = r;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]`; returns `top`.
fn ereach(k: usize, ptr: &[usize], rows: &[usize], parent: &[usize], mark: &mut [usize], stack: &mut [usize]) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for &r in &rows[ptr[k]..ptr[k + 1]] {
        let mut i = r;
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl SparseCholesky {
    /// Factors a symmetric positive definite matrix. Only the entries with
    /// `pinv[i] <= pinv[j]` are read, so an exactly symmetric input is
    /// expected.
    pub fn factor(a: &CsrMatrix, ordering: &Ordering) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::NotSquare { nrows: a.nrows(), ncols: a.ncols() });
        }
        let n = a.nrows();
        let perm = ordering.permutation(a);
        let pinv = invert(&perm);
        let (ptr, rows, vals) = permuted_upper(a, &pinv);
        let parent = etree(n, &ptr, &rows);

        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(k, &ptr, &rows, &parent, &mut mark, &mut stack);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut fill = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.fill(NONE);

        for k in 0..n {
            let top = ereach(k, &ptr, &rows, &parent, &mut mark, &mut stack);
            for p in ptr[k]..ptr[k + 1] {
                x[rows[p]] += vals[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..fill[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                row_idx[fill[i]] = k;
                values[fill[i]] = lki;
                fill[i] += 1;
            }
            if !(d > 0.0) {
                return Err(LinalgError::NotPositiveDefinite { pivot: perm[k], value: d });
            }
            row_idx[fill[k]] = k;
            values[fill[k]] = libm::sqrt(d);
            fill[k] += 1;
        }
        Ok(Self { n, perm, col_ptr, row_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L`.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &DVector) -> Result<DVector, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch { expected: self.n, actual: b.len() });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for j in 0..self.n {
            let r = self.col_ptr[j]..self.col_ptr[j + 1];
            x[j] /= self.values[r.start];
            let xj = x[j];
            for p in r.start + 1..r.end {
                x[self.row_idx[p]] -= self.values[p] * xj;
            }
        }
        for j in (0..self.n).rev() {
            let r = self.col_ptr[j]..self.col_ptr[j + 1];
            let mut s = x[j];
            for p in r.start + 1..r.end {
                s -= self.values[p] * x[self.row_idx[p]];
            }
            x[j] = s / self.values[r.start];
        }
        let mut out = DVector::zeros(self.n);
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        Ok(out)
    }
}
