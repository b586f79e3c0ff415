//! Unit-diagonal normalization `J = I - R` and the inverse rescaling of
//! solutions.
//!
//! With `d_i = sqrt(J_ii)`, the normalized system has matrix `I - R` where
//! `R_ij = -J_ij / (d_i d_j)` off the diagonal, and right-hand side
//! `h_norm_i = h_i / d_i`. Solving it and dividing each component by `d_i`
//! recovers the solution of the original system.

use crate::sparse::SparseSymMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NormalizeError {
    #[error("diagonal entry {index} is {value}, but normalization requires J_ii > 0")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("vector length {got} does not match matrix dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// The partial-correlation form of a model: `R` (zero diagonal), the rescaled
/// right-hand side, and the scale factors `d_i = sqrt(J_ii)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedModel {
    pub r: SparseSymMatrix,
    pub h_norm: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Rescales `(J, h)` to unit diagonal, returning `R = I - D^{-1/2} J D^{-1/2}`.
pub fn normalize_unit_diagonal(
    j: &SparseSymMatrix,
    h: &[f64],
) -> Result<NormalizedModel, NormalizeError> {
    let n = j.n();
    if h.len() != n {
        return Err(NormalizeError::LengthMismatch {
            expected: n,
            got: h.len(),
        });
    }
    let mut scale = Vec::with_capacity(n);
    for (i, &d) in j.diag().iter().enumerate() {
        if d <= 0.0 || !d.is_finite() {
            return Err(NormalizeError::NonPositiveDiagonal { index: i, value: d });
        }
        scale.push(d.sqrt());
    }
    let r = j.map_structure(vec![0.0; n], |i, k, v| -v / (scale[i] * scale[k]));
    let h_norm = h.iter().zip(&scale).map(|(hi, di)| hi / di).collect();
    Ok(NormalizedModel {
        r,
        h_norm,
        scale,
    })
}

/// Undoes the normalization: `x_i = x_norm_i / d_i`.
pub fn recover_solution(x_norm: &[f64], scale: &[f64]) -> Vec<f64> {
    assert_eq!(x_norm.len(), scale.len(), "vector lengths must match");
    x_norm.iter().zip(scale).map(|(x, d)| x / d).collect()
}
