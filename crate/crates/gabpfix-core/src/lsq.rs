//! Least-squares extensions: normal equations, the augmented-system
//! construction, and the regularized solve through the double loop.
//!
//! For a full-column-rank `Jt` (n x k, n >= k), the minimizer of
//! `||Jt x - ht||_2` solves the normal equations `(Jt^T Jt) x = Jt^T ht`.
//! The augmented (k+n) system embeds the same problem without forming
//! `Jt^T Jt`; its `-gamma I` lower block variant is algebraically identical
//! to ridge regularization, `x = (Jt^T Jt + gamma I)^{-1} Jt^T ht`. With
//! `gamma = 0` the augmented matrix is invertible only when `Jt` is square
//! (the zero block makes the over-determined case singular), which is why
//! the regularized route is the one wired to the iterative solver.

use crate::solver::{double_loop_solve, FixedSolveReport, OuterSettings, SolverError};
use crate::loading::LoadingSpec;
use crate::sparse::{RectMatrix, SparseSymMatrix};

/// Forms `(Jt^T Jt, Jt^T ht)`. The product is accumulated densely (the
/// normal equations of a sparse matrix generally fill in) and in a fixed
/// row-major order, so repeated calls are bitwise identical.
pub fn normal_equations(jt: &RectMatrix, ht: &[f64]) -> (SparseSymMatrix, Vec<f64>) {
    assert_eq!(ht.len(), jt.rows(), "vector length must match rows");
    let k = jt.cols();
    let mut acc = vec![0.0; k * k];
    let mut hbar = vec![0.0; k];
    for r in 0..jt.rows() {
        let row = jt.row(r);
        for (idx, &(a, va)) in row.iter().enumerate() {
            hbar[a] += va * ht[r];
            for &(b, vb) in &row[idx..] {
                acc[a * k + b] += va * vb;
            }
        }
    }
    let entries = (0..k).flat_map(|a| {
        let acc = &acc;
        (a..k).filter_map(move |b| {
            let v = acc[a * k + b];
            (a == b || v != 0.0).then_some((a, b, v))
        })
    });
    let jbar = SparseSymMatrix::from_entries(k, entries).expect("accumulator is well-formed");
    (jbar, hbar)
}

/// The symmetric (k+n) system `[[I, Jt^T], [Jt, -gamma I]]` with right-hand
/// side `(0_k, ht)`; the unknowns are `(x, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub matrix: SparseSymMatrix,
    pub rhs: Vec<f64>,
}

/// Builds the augmented system. `gamma = 0` gives the plain block form; any
/// `gamma > 0` puts `-gamma` on the lower-right diagonal block and makes the
/// system invertible for every full-column-rank `Jt`, with first-k solution
/// equal to the ridge solution of [`regularized_lsq_solve`].
pub fn build_augmented(jt: &RectMatrix, ht: &[f64], gamma: f64) -> AugmentedSystem {
    assert_eq!(ht.len(), jt.rows(), "vector length must match rows");
    assert!(
        gamma.is_finite() && gamma >= 0.0,
        "gamma must be finite and non-negative"
    );
    let k = jt.cols();
    let n = jt.rows();
    let diag = (0..k)
        .map(|i| (i, i, 1.0))
        .chain((0..n).map(|r| (k + r, k + r, -gamma)));
    let blocks = jt.entries().map(|(r, c, v)| (c, k + r, v));
    let matrix =
        SparseSymMatrix::from_entries(k + n, diag.chain(blocks)).expect("indices in range");
    let mut rhs = vec![0.0; k];
    rhs.extend_from_slice(ht);
    AugmentedSystem { matrix, rhs }
}

/// Solves `x = (Jt^T Jt + gamma I)^{-1} Jt^T ht` by forming the normal
/// equations, adding `gamma I` and delegating to the double loop. With
/// `gamma = 0` this is the pseudo-inverse (least-squares) solution.
pub fn regularized_lsq_solve(
    jt: &RectMatrix,
    ht: &[f64],
    gamma: f64,
    loading: &LoadingSpec,
    settings: &OuterSettings,
) -> Result<FixedSolveReport, SolverError> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(SolverError::InvalidSettings(format!(
            "regularization gamma must be finite and non-negative, got {gamma}"
        )));
    }
    let (jbar, hbar) = normal_equations(jt, ht);
    let jreg = jbar
        .with_diag_added(&vec![gamma; jt.cols()])
        .expect("lengths match");
    double_loop_solve(&jreg, &hbar, loading, settings)
}
