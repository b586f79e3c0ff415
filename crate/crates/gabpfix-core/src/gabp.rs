//! Gaussian belief propagation: synchronous message sweeps, convergence and
//! divergence detection, and marginal inference.
//!
//! Each directed edge `i -> j` carries a precision message `alpha_ij` and a
//! mean message `beta_ij`. A sweep recomputes every message from the previous
//! state: with cavity aggregates `a_{i\j} = J_ii + sum_{k in N(i), k != j}
//! alpha_ki` and `b_{i\j} = h_i + sum_{k != j} beta_ki`, the new messages are
//! `alpha_ij = -J_ij^2 / a_{i\j}` and `beta_ij = -J_ij b_{i\j} / a_{i\j}`.
//! The aggregates are formed as full-neighborhood sums minus the excluded
//! term, so a sweep costs O(edges) rather than O(sum of squared degrees).

use crate::sparse::SparseSymMatrix;
use std::fmt;
use thiserror::Error;

/// Cavity precisions smaller than this in magnitude abort the computation
/// rather than amplify roundoff into garbage.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// A division by a near-zero cavity precision; `neighbor` is absent when the
/// failure occurred in per-node inference rather than on an edge.
#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub struct Breakdown {
    pub node: usize,
    pub neighbor: Option<usize>,
}

impl fmt::Display for Breakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.neighbor {
            Some(j) => write!(
                f,
                "cavity precision below {PIVOT_FLOOR:e} on edge {} -> {j}",
                self.node
            ),
            None => write!(
                f,
                "posterior precision below {PIVOT_FLOOR:e} at node {}",
                self.node
            ),
        }
    }
}

/// Messages on every directed edge of the matrix graph, indexed by the
/// matrix's edge storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl MessageState {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Largest message magnitude across both families.
    pub fn max_abs(&self) -> f64 {
        self.alpha
            .iter()
            .chain(&self.beta)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GabpSettings {
    pub max_iterations: usize,
    /// Convergence threshold on the maximum absolute message change per
    /// sweep.
    pub message_tol: f64,
    /// Any message magnitude beyond this aborts with [`GabpStatus::Diverged`].
    pub divergence_bound: f64,
}

impl Default for GabpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            message_tol: 1e-10,
            divergence_bound: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GabpStatus {
    Converged,
    MaxIterations,
    Diverged,
    NumericalBreakdown,
}

impl fmt::Display for GabpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GabpStatus::Converged => "converged",
            GabpStatus::MaxIterations => "max-iterations",
            GabpStatus::Diverged => "diverged",
            GabpStatus::NumericalBreakdown => "numerical-breakdown",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GabpResult {
    /// Posterior mean estimates; on a converged walk-summable model these
    /// solve `J x = h`.
    pub means: Vec<f64>,
    /// Posterior variance estimates `K_i`; exact on trees, approximate on
    /// loopy graphs.
    pub variances: Vec<f64>,
    pub status: GabpStatus,
    /// Sweeps performed.
    pub iterations: usize,
    /// Per-sweep maximum absolute message change.
    pub residual_history: Vec<f64>,
}

/// Zero messages on every directed edge.
pub fn init_messages(j: &SparseSymMatrix) -> MessageState {
    MessageState {
        alpha: vec![0.0; j.directed_edges()],
        beta: vec![0.0; j.directed_edges()],
    }
}

/// One synchronous sweep; every new message is computed from `state`.
/// Returns the new state and the maximum absolute message change.
pub fn sweep(
    j: &SparseSymMatrix,
    h: &[f64],
    state: &MessageState,
) -> Result<(MessageState, f64), Breakdown> {
    let mut next = init_messages(j);
    let change = sweep_into(j, h, state, &mut next)?;
    Ok((next, change))
}

fn sweep_into(
    j: &SparseSymMatrix,
    h: &[f64],
    prev: &MessageState,
    next: &mut MessageState,
) -> Result<f64, Breakdown> {
    assert_eq!(h.len(), j.n(), "vector length must match dimension");
    assert_eq!(
        prev.alpha.len(),
        j.directed_edges(),
        "message state does not match the matrix edge set"
    );
    let mut max_change = 0.0f64;
    for i in 0..j.n() {
        let range = j.edge_range(i);
        let mut sum_a = j.diag()[i];
        let mut sum_b = h[i];
        for nb in j.neighbors(i) {
            sum_a += prev.alpha[nb.rev];
            sum_b += prev.beta[nb.rev];
        }
        for (p, nb) in range.zip(j.neighbors(i)) {
            let cavity_a = sum_a - prev.alpha[nb.rev];
            if cavity_a.abs() < PIVOT_FLOOR {
                return Err(Breakdown {
                    node: i,
                    neighbor: Some(nb.col),
                });
            }
            let cavity_b = sum_b - prev.beta[nb.rev];
            let alpha = -(nb.val * nb.val) / cavity_a;
            let beta = -nb.val * cavity_b / cavity_a;
            max_change = max_change
                .max((alpha - prev.alpha[p]).abs())
                .max((beta - prev.beta[p]).abs());
            next.alpha[p] = alpha;
            next.beta[p] = beta;
        }
    }
    Ok(max_change)
}

/// Per-node marginals from the current messages:
/// `K_i = (J_ii + sum alpha_ki)^-1`, `mu_i = K_i (h_i + sum beta_ki)`.
pub fn infer(
    j: &SparseSymMatrix,
    h: &[f64],
    state: &MessageState,
) -> Result<(Vec<f64>, Vec<f64>), Breakdown> {
    assert_eq!(h.len(), j.n(), "vector length must match dimension");
    let mut means = Vec::with_capacity(j.n());
    let mut variances = Vec::with_capacity(j.n());
    for i in 0..j.n() {
        let mut precision = j.diag()[i];
        let mut shift = h[i];
        for nb in j.neighbors(i) {
            precision += state.alpha[nb.rev];
            shift += state.beta[nb.rev];
        }
        if precision.abs() < PIVOT_FLOOR {
            return Err(Breakdown {
                node: i,
                neighbor: None,
            });
        }
        variances.push(1.0 / precision);
        means.push(shift / precision);
    }
    Ok((means, variances))
}

/// Runs GaBP from zero messages.
pub fn run_gabp(j: &SparseSymMatrix, h: &[f64], settings: &GabpSettings) -> GabpResult {
    let mut state = init_messages(j);
    run_gabp_warm(j, h, settings, &mut state)
}

/// Runs GaBP from an existing message state, leaving the final state in
/// place. This is the warm-start entry used by the outer correction loop,
/// where the right-hand side moves slightly between calls.
///
/// Each sweep is checked in order for breakdown, divergence (any message
/// magnitude above `divergence_bound`), then convergence (change at most
/// `message_tol`). Means and variances are inferred from the final state
/// whatever the status; if that inference itself breaks down, the status
/// becomes [`GabpStatus::NumericalBreakdown`] and zeros are reported.
pub fn run_gabp_warm(
    j: &SparseSymMatrix,
    h: &[f64],
    settings: &GabpSettings,
    state: &mut MessageState,
) -> GabpResult {
    assert!(settings.message_tol > 0.0, "message_tol must be positive");
    assert!(
        settings.divergence_bound > 0.0,
        "divergence_bound must be positive"
    );
    let mut next = init_messages(j);
    let mut history = Vec::new();
    let mut status = GabpStatus::MaxIterations;
    let mut iterations = settings.max_iterations;
    for it in 1..=settings.max_iterations {
        match sweep_into(j, h, state, &mut next) {
            Err(_) => {
                status = GabpStatus::NumericalBreakdown;
                iterations = it;
                break;
            }
            Ok(change) => {
                std::mem::swap(state, &mut next);
                history.push(change);
                if state.max_abs() > settings.divergence_bound {
                    status = GabpStatus::Diverged;
                    iterations = it;
                    break;
                }
                if change <= settings.message_tol {
                    status = GabpStatus::Converged;
                    iterations = it;
                    break;
                }
            }
        }
    }

    let (means, variances, status) = match infer(j, h, state) {
        Ok((means, variances)) => (means, variances, status),
        Err(_) => (
            vec![0.0; j.n()],
            vec![0.0; j.n()],
            GabpStatus::NumericalBreakdown,
        ),
    };
    GabpResult {
        means,
        variances,
        status,
        iterations,
        residual_history: history,
    }
}
