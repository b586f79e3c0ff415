//! The three detection experiments: plain-GaBP divergence traces, the
//! loaded double/single-loop fix, and the loading-level tradeoff sweep.

use std::sync::Mutex;

use thiserror::Error;

use gabpfix_core::dense::solve_dense;
use gabpfix_core::{
    double_loop_solve, infer, init_messages, normalize_unit_diagonal, single_loop_solve, sweep,
    FixedSolveReport, GabpSettings, GabpStatus, LoadingSpec, NormalizeError, OuterSettings,
    SolveStatus, SolverError, SparseSymMatrix,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error("sweep grid must be positive and strictly increasing")]
    BadGrid,
    #[error("dense cross-check failed: the system is singular")]
    SingularSystem,
}

/// Outcome of a plain (unloaded) GaBP run with a per-iteration estimate
/// trace. Row 0 is the estimate from the zero message state; skipped rows
/// mean the marginal precisions were momentarily singular mid-flight.
pub struct DivergenceRun {
    pub status: GabpStatus,
    pub iterations: usize,
    /// Last successfully inferred means, if any.
    pub final_means: Option<Vec<f64>>,
    /// `(iteration, per-coordinate means)` rows of the trace.
    pub trace: Vec<(usize, Vec<f64>)>,
}

/// Runs synchronous GaBP while recording the would-be solution after every
/// sweep. Mirrors the plain runner's status logic: breakdown beats
/// divergence beats convergence, checked in that order each sweep.
pub fn experiment_divergence(
    a: &SparseSymMatrix,
    y: &[f64],
    settings: &GabpSettings,
) -> DivergenceRun {
    let mut state = init_messages(a);
    let mut trace = Vec::new();
    if let Ok((means, _)) = infer(a, y, &state) {
        trace.push((0, means));
    }
    let mut status = GabpStatus::MaxIterations;
    let mut iterations = settings.max_iterations;
    for it in 1..=settings.max_iterations {
        let change = match sweep(a, y, &state) {
            Ok((next, change)) => {
                state = next;
                change
            }
            Err(_) => {
                status = GabpStatus::NumericalBreakdown;
                iterations = it;
                break;
            }
        };
        if let Ok((means, _)) = infer(a, y, &state) {
            trace.push((it, means));
        }
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
    let final_means = trace.last().map(|(_, m)| m.clone());
    DivergenceRun {
        status,
        iterations,
        final_means,
        trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixMode {
    Double,
    Single,
}

pub struct FixedRun {
    pub report: FixedSolveReport,
    /// Largest coordinate difference against a dense direct solve.
    pub dense_max_diff: f64,
}

/// Runs the loaded solver and cross-checks the result against a dense
/// direct solve of the same system.
pub fn experiment_fixed(
    a: &SparseSymMatrix,
    y: &[f64],
    loading: &LoadingSpec,
    settings: &OuterSettings,
    mode: FixMode,
) -> Result<FixedRun, ExperimentError> {
    let report = match mode {
        FixMode::Double => double_loop_solve(a, y, loading, settings)?,
        FixMode::Single => single_loop_solve(a, y, loading, settings)?,
    };
    let dense = solve_dense(a, y).ok_or(ExperimentError::SingularSystem)?;
    let dense_max_diff = report
        .solution
        .iter()
        .zip(&dense)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(FixedRun {
        report,
        dense_max_diff,
    })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Loading levels in units of the diagonally-dominant level (1.0 loads
    /// the model exactly to diagonal dominance).
    pub gamma_grid: Vec<f64>,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
}

impl SweepConfig {
    /// 12 log-spaced levels spanning [0.2, 3.0] times the DD level.
    pub fn default_grid() -> Vec<f64> {
        log_spaced_grid(0.2, 3.0, 12)
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let increasing = self
            .gamma_grid
            .windows(2)
            .all(|w| w[0] < w[1]);
        if self.gamma_grid.is_empty() || self.gamma_grid[0] <= 0.0 || !increasing {
            return Err(ExperimentError::BadGrid);
        }
        Ok(())
    }
}

pub fn log_spaced_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let ratio = hi / lo;
    (0..points)
        .map(|i| lo * ratio.powf(i as f64 / (points - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Loading level in DD units (the grid value).
    pub gamma_normalized: f64,
    pub outer_iters: usize,
    pub avg_inner_iters: f64,
    pub total_iters: usize,
    pub status: SolveStatus,
}

/// Runs the double loop at every loading level of the grid and tabulates
/// the outer/inner iteration tradeoff. Failures at individual grid points
/// become rows with their status; the sweep continues.
///
/// Points run on up to `GABPFIX_THREADS` worker threads (0 or unset runs
/// sequentially); rows always come back in grid order.
pub fn experiment_sweep(
    a: &SparseSymMatrix,
    y: &[f64],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>, ExperimentError> {
    config.validate()?;
    // The uniform-loading level that makes the normalized model exactly
    // diagonally dominant: 1 + gamma = max_i sum_j |R_ij|.
    let model = normalize_unit_diagonal(a, y)?;
    let mut max_row_sum = 0.0f64;
    for i in 0..a.n() {
        let row: f64 = model.r.neighbors(i).iter().map(|nb| nb.val.abs()).sum();
        max_row_sum = max_row_sum.max(row);
    }
    let gamma_dd = (max_row_sum - 1.0).max(0.0);

    let run_point = |level: f64| -> SweepRow {
        let settings = OuterSettings {
            outer_tol: config.outer_tol,
            max_outer: config.max_outer,
            inner: GabpSettings {
                max_iterations: config.max_inner,
                message_tol: config.inner_tol,
                ..GabpSettings::default()
            },
            step_size: 0.5,
        };
        let loading = LoadingSpec::uniform(level * gamma_dd);
        match double_loop_solve(a, y, &loading, &settings) {
            Ok(report) => {
                let total: usize = report.inner_iterations_per_step.iter().sum();
                let outer = report.outer_iterations;
                SweepRow {
                    gamma_normalized: level,
                    outer_iters: outer,
                    avg_inner_iters: if outer == 0 { 0.0 } else { total as f64 / outer as f64 },
                    total_iters: total,
                    status: report.status,
                }
            }
            // Uniform loading over a validated grid cannot fail construction,
            // but record it as a failed point rather than aborting the sweep.
            Err(_) => SweepRow {
                gamma_normalized: level,
                outer_iters: 0,
                avg_inner_iters: 0.0,
                total_iters: 0,
                status: SolveStatus::InnerFailure {
                    at_outer: 0,
                    inner: GabpStatus::NumericalBreakdown,
                },
            },
        }
    };

    let threads = std::env::var("GABPFIX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0)
        .min(config.gamma_grid.len());
    if threads <= 1 {
        return Ok(config.gamma_grid.iter().map(|&t| run_point(t)).collect());
    }

    let slots: Vec<Mutex<Option<SweepRow>>> =
        config.gamma_grid.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for tid in 0..threads {
            let slots = &slots;
            let grid = &config.gamma_grid;
            let run_point = &run_point;
            scope.spawn(move || {
                for idx in (tid..grid.len()).step_by(threads) {
                    *slots[idx].lock().unwrap() = Some(run_point(grid[idx]));
                }
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every point ran"))
        .collect())
}
