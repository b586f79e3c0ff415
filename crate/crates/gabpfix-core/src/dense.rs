//! Dense linear-algebra helpers backed by nalgebra.
//!
//! These exist for diagnostics (contraction factors) and for verifying the
//! sparse iterative paths against direct solves at small scale; nothing on
//! the message-passing path depends on them.

use crate::sparse::{RectMatrix, SparseSymMatrix};
use nalgebra::DMatrix;

pub fn to_dmatrix(m: &SparseSymMatrix) -> DMatrix<f64> {
    let n = m.n();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = m.diag()[i];
        for nb in m.neighbors(i) {
            out[(i, nb.col)] = nb.val;
        }
    }
    out
}

pub fn rect_to_dmatrix(m: &RectMatrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.rows(), m.cols());
    for (r, c, v) in m.entries() {
        out[(r, c)] = v;
    }
    out
}

/// Direct solve of `Jx = h` by LU with partial pivoting. Returns `None` when
/// the matrix is singular. Works for indefinite matrices, so it also covers
/// the augmented least-squares systems.
pub fn solve_dense(j: &SparseSymMatrix, h: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(h.len(), j.n(), "vector length must match dimension");
    let lu = to_dmatrix(j).lu();
    let rhs = nalgebra::DVector::from_column_slice(h);
    lu.solve(&rhs).map(|x| x.as_slice().to_vec())
}

/// Eigenvalues of a symmetric dense matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut eigs: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}
