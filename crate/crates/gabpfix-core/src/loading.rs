//! Diagonal loading constructions that restore walk-summability, and the
//! dense contraction-factor diagnostic for the outer correction loop.
//!
//! Two constructions are provided. Uniform loading adds `gamma` to the
//! normalized model's unit diagonal, which scales the partial-correlation
//! radius exactly: `rho(|R'|) = rho(|R|) / (1 + gamma)`, so
//! `gamma = rho(|R|) - 1 + margin` lands strictly inside the walk-summable
//! region. Diagonally-dominant loading raises each deficient diagonal entry
//! just past its absolute off-diagonal row sum, which is the stricter but
//! spectrum-free sufficient condition.

use crate::dense;
use crate::normalize::{normalize_unit_diagonal, NormalizeError};
use crate::sparse::SparseSymMatrix;
use crate::spectral::{spectral_radius_abs, SpectralError, DEFAULT_MAX_ITER, DEFAULT_TOL};
use thiserror::Error;

pub const DEFAULT_UNIFORM_MARGIN: f64 = 0.05;
pub const DEFAULT_DD_MARGIN: f64 = 0.01;

/// Dense contraction-factor computations refuse matrices larger than this.
pub const CONTRACTION_DENSE_CAP: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum LoadingError {
    #[error("uniform loading gamma must be finite and >= 0, got {gamma}")]
    InvalidGamma { gamma: f64 },
    #[error("margin must be finite and > 0, got {margin}")]
    InvalidMargin { margin: f64 },
    #[error("custom loading entry {index} is {value}, but all entries must be finite and >= 0")]
    InvalidCustomEntry { index: usize, value: f64 },
    #[error("custom loading has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("uniform loading requires J_ii > 0, but diagonal entry {index} is {value}")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("dense contraction factor is capped at n = {cap}, got n = {n}")]
    DimensionTooLarge { n: usize, cap: usize },
    #[error("J + Gamma is not positive definite; contraction factor is undefined")]
    NotPositiveDefinite,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

/// How the loading vector is produced from the matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadingMode {
    /// `Gamma_ii = gamma * J_ii`: adds `gamma` to the unit diagonal of the
    /// normalized model.
    Uniform { gamma: f64 },
    /// `Gamma_ii = max(0, sum_{j != i} |J_ij| - J_ii + margin)`.
    DiagDominant,
    /// Caller-supplied per-node loading in original (unnormalized) units.
    Custom { gamma: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingSpec {
    pub mode: LoadingMode,
    /// Slack added beyond the bare threshold; used by the diagonally-dominant
    /// construction (uniform constructors fold it into `gamma` up front).
    pub margin: f64,
}

impl LoadingSpec {
    /// Uniform loading with an explicit, already-final `gamma`.
    pub fn uniform(gamma: f64) -> Self {
        Self {
            mode: LoadingMode::Uniform { gamma },
            margin: 0.0,
        }
    }

    /// Diagonally-dominant loading with the default margin.
    pub fn diag_dominant() -> Self {
        Self::diag_dominant_with_margin(DEFAULT_DD_MARGIN)
    }

    pub fn diag_dominant_with_margin(margin: f64) -> Self {
        Self {
            mode: LoadingMode::DiagDominant,
            margin,
        }
    }

    pub fn custom(gamma: Vec<f64>) -> Self {
        Self {
            mode: LoadingMode::Custom { gamma },
            margin: 0.0,
        }
    }

    /// Materializes the per-node loading vector for `j`.
    pub fn gamma_vector(&self, j: &SparseSymMatrix) -> Result<Vec<f64>, LoadingError> {
        match &self.mode {
            LoadingMode::Uniform { gamma } => {
                if !gamma.is_finite() || *gamma < 0.0 {
                    return Err(LoadingError::InvalidGamma { gamma: *gamma });
                }
                j.diag()
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| {
                        if d <= 0.0 {
                            Err(LoadingError::NonPositiveDiagonal { index: i, value: d })
                        } else {
                            Ok(gamma * d)
                        }
                    })
                    .collect()
            }
            LoadingMode::DiagDominant => {
                if !self.margin.is_finite() || self.margin <= 0.0 {
                    return Err(LoadingError::InvalidMargin {
                        margin: self.margin,
                    });
                }
                Ok((0..j.n())
                    .map(|i| {
                        let off: f64 = j.neighbors(i).iter().map(|nb| nb.val.abs()).sum();
                        (off - j.diag()[i] + self.margin).max(0.0)
                    })
                    .collect())
            }
            LoadingMode::Custom { gamma } => {
                if gamma.len() != j.n() {
                    return Err(LoadingError::LengthMismatch {
                        expected: j.n(),
                        got: gamma.len(),
                    });
                }
                for (i, &g) in gamma.iter().enumerate() {
                    if !g.is_finite() || g < 0.0 {
                        return Err(LoadingError::InvalidCustomEntry { index: i, value: g });
                    }
                }
                Ok(gamma.clone())
            }
        }
    }
}

/// Measures `rho(|R|)` of the normalized model and returns uniform loading
/// `gamma = max(0, rho - 1 + margin)`, which guarantees
/// `rho(|R|) / (1 + gamma) < 1`.
pub fn compute_uniform_loading(
    j: &SparseSymMatrix,
    margin: f64,
) -> Result<LoadingSpec, LoadingError> {
    if !margin.is_finite() || margin <= 0.0 {
        return Err(LoadingError::InvalidMargin { margin });
    }
    let zero_h = vec![0.0; j.n()];
    let model = normalize_unit_diagonal(j, &zero_h)?;
    let rho = spectral_radius_abs(&model.r, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(LoadingSpec::uniform((rho - 1.0 + margin).max(0.0)))
}

/// Diagonally-dominant loading: `Gamma_ii = max(0, sum |J_ij| - J_ii +
/// margin)`, which makes `J + Gamma` strictly diagonally dominant and hence
/// walk-summable.
pub fn compute_dd_loading(j: &SparseSymMatrix, margin: f64) -> Result<LoadingSpec, LoadingError> {
    if !margin.is_finite() || margin <= 0.0 {
        return Err(LoadingError::InvalidMargin { margin });
    }
    let spec = LoadingSpec::diag_dominant_with_margin(margin);
    debug_assert!(j
        .with_diag_added(&spec.gamma_vector(j).expect("margin validated above"))
        .expect("lengths match")
        .is_diag_dominant());
    Ok(spec)
}

/// Spectral radius of the outer-iteration operator `H = (J + Gamma)^{-1}
/// Gamma`, computed densely via the symmetric similar form
/// `Gamma^{1/2} (J + Gamma)^{-1} Gamma^{1/2}`. Strictly below 1 whenever `J`
/// is positive definite and `Gamma >= 0`.
pub fn contraction_factor(j: &SparseSymMatrix, gamma: &[f64]) -> Result<f64, LoadingError> {
    let n = j.n();
    if n > CONTRACTION_DENSE_CAP {
        return Err(LoadingError::DimensionTooLarge {
            n,
            cap: CONTRACTION_DENSE_CAP,
        });
    }
    if gamma.len() != n {
        return Err(LoadingError::LengthMismatch {
            expected: n,
            got: gamma.len(),
        });
    }
    for (i, &g) in gamma.iter().enumerate() {
        if !g.is_finite() || g < 0.0 {
            return Err(LoadingError::InvalidCustomEntry { index: i, value: g });
        }
    }
    let mut loaded = dense::to_dmatrix(j);
    for i in 0..n {
        loaded[(i, i)] += gamma[i];
    }
    let inv = loaded
        .cholesky()
        .ok_or(LoadingError::NotPositiveDefinite)?
        .inverse();
    let sqrt_g: Vec<f64> = gamma.iter().map(|g| g.sqrt()).collect();
    let mut sandwich = inv;
    for i in 0..n {
        for k in 0..n {
            sandwich[(i, k)] *= sqrt_g[i] * sqrt_g[k];
        }
    }
    let eigs = dense::symmetric_eigenvalues(&sandwich);
    Ok(eigs.iter().fold(0.0, |m: f64, &e| m.max(e.abs())))
}
