//! Spectral-radius estimation of elementwise-absolute matrices and the
//! walk-summability predicate built on it.
//!
//! `|M|` is symmetric and entrywise nonnegative, so its spectral radius is
//! its largest eigenvalue. Power iteration runs on the shifted operator
//! `|M| + cI` with `c` equal to the largest absolute row sum; the shift makes
//! the dominant eigenvalue unique in magnitude even when the spectrum is
//! symmetric (for example on bipartite structures), and `c` is subtracted
//! from the converged Rayleigh quotient.

use crate::normalize::{normalize_unit_diagonal, NormalizeError};
use crate::sparse::SparseSymMatrix;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 50_000;

/// Consecutive stable Rayleigh quotients required before accepting the
/// estimate.
const STABLE_STREAK: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("power iteration did not stabilize within {iterations} iterations (last estimate {best})")]
    NoConvergence { best: f64, iterations: usize },
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

/// Estimates `rho(|M|)` by power iteration on the shifted absolute matrix.
///
/// Starts from the all-ones vector; if the Rayleigh quotient fails to hold a
/// relative change of at most `tol` for ten consecutive iterations, a single
/// deterministic pseudo-random restart is attempted before giving up.
pub fn spectral_radius_abs(
    m: &SparseSymMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<f64, SpectralError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = m.n();
    if n == 0 {
        return Ok(0.0);
    }
    let shift = (0..n)
        .map(|i| {
            m.diag()[i].abs() + m.neighbors(i).iter().map(|nb| nb.val.abs()).sum::<f64>()
        })
        .fold(0.0, f64::max);
    if shift == 0.0 {
        return Ok(0.0);
    }

    let ones = vec![1.0 / (n as f64).sqrt(); n];
    match power_iterate(m, shift, ones, tol, max_iter) {
        Ok(rho) => Ok(rho),
        Err(_) => {
            let restart = pseudo_random_start(n);
            power_iterate(m, shift, restart, tol, max_iter)
        }
    }
}

fn power_iterate(
    m: &SparseSymMatrix,
    shift: f64,
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<f64, SpectralError> {
    let n = m.n();
    let mut prev_rq = f64::INFINITY;
    let mut stable = 0;
    for it in 1..=max_iter {
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = (m.diag()[i].abs() + shift) * x[i];
            for nb in m.neighbors(i) {
                acc += nb.val.abs() * x[nb.col];
            }
            y.push(acc);
        }
        let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if (rq - prev_rq).abs() <= tol * rq.abs().max(1.0) {
            stable += 1;
            if stable >= STABLE_STREAK {
                return Ok((rq - shift).max(0.0));
            }
        } else {
            stable = 0;
        }
        prev_rq = rq;
        if it == max_iter {
            return Err(SpectralError::NoConvergence {
                best: (rq - shift).max(0.0),
                iterations: max_iter,
            });
        }
    }
    unreachable!("loop returns before falling through");
}

/// Fixed xorshift-based start vector with entries in [0.1, 1.1), so restarts
/// are reproducible and stay inside the nonnegative Perron cone.
fn pseudo_random_start(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        x.push(0.1 + (state >> 11) as f64 / (1u64 << 53) as f64);
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    x
}

/// Normalizes `J` and reports `(rho(|R|) < 1, rho(|R|))`.
///
/// The boundary case `rho = 1` counts as not walk-summable.
pub fn is_walk_summable(j: &SparseSymMatrix, tol: f64) -> Result<(bool, f64), SpectralError> {
    let zero_h = vec![0.0; j.n()];
    let model = normalize_unit_diagonal(j, &zero_h)?;
    let rho = spectral_radius_abs(&model.r, tol, DEFAULT_MAX_ITER)?;
    Ok((rho < 1.0, rho))
}
