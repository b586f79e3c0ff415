//! Gaussian belief propagation (GaBP) for sparse symmetric linear systems,
//! with diagonal-loading constructions that restore convergence on models
//! where plain GaBP diverges.
//!
//! The solver view: for `J x = h` with symmetric `J`, GaBP passes scalar
//! precision/mean messages along the edges of the matrix graph. It converges
//! when the normalized off-diagonal part `R` is walk-summable, i.e.
//! `rho(|R|) < 1`. When it is not, [`double_loop_solve`] and
//! [`single_loop_solve`] solve the loaded model `(J + Gamma) x = h + Gamma x_t`
//! repeatedly; each inner problem is walk-summable by construction and the
//! outer iteration contracts toward the solution of the original system.
//!
//! Crate layout:
//!
//! - [`sparse`]: symmetric and rectangular sparse matrices.
//! - [`io`]: Matrix Market and plain-text vector readers.
//! - [`normalize`]: unit-diagonal normalization `J = D^{1/2}(I - R)D^{1/2}`.
//! - [`spectral`]: power iteration for `rho(|M|)` and walk-summability.
//! - [`gabp`]: the message-passing kernel (sweeps, inference, plain runs).
//! - [`loading`]: uniform and diagonally-dominant loading constructions.
//! - [`solver`]: the double-loop and single-loop fixed solvers.
//! - [`lsq`]: least-squares via normal equations and ridge regularization.
//! - [`dense`]: small dense oracles (LU solve, eigenvalues) for diagnostics.

pub mod dense;
pub mod gabp;
pub mod io;
pub mod loading;
pub mod lsq;
pub mod normalize;
pub mod solver;
pub mod sparse;
pub mod spectral;

pub use gabp::{
    infer, init_messages, run_gabp, run_gabp_warm, sweep, Breakdown, GabpResult, GabpSettings,
    GabpStatus, MessageState,
};
pub use io::{read_rect_matrix, read_sym_matrix, read_vector, IoError};
pub use loading::{
    compute_dd_loading, compute_uniform_loading, contraction_factor, LoadingError, LoadingMode,
    LoadingSpec,
};
pub use lsq::{build_augmented, normal_equations, regularized_lsq_solve, AugmentedSystem};
pub use normalize::{normalize_unit_diagonal, recover_solution, NormalizeError, NormalizedModel};
pub use solver::{
    double_loop_solve, single_loop_solve, FixedSolveReport, OuterSettings, SolveStatus,
    SolverError,
};
pub use sparse::{BuildError, Neighbor, RectMatrix, SparseSymMatrix};
pub use spectral::{is_walk_summable, spectral_radius_abs, SpectralError};
