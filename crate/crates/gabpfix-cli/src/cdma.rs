//! Synthetic CDMA multiuser-detection instances.
//!
//! A draw consists of an n x k spreading matrix `S`, the correlation
//! `C = S^T S`, the detector matrix `A = C + sigma2 I`, and the
//! matched-filter observation `y = S^T (S x_true + noise)` for a random
//! symbol vector `x_true` with entries +-1 and white Gaussian noise of
//! variance `sigma2`. Solving `A x = y` is the linear MMSE detection step.
//!
//! All randomness comes from one seeded ChaCha8 stream with a fixed draw
//! order (spreading entries row-major, then symbols, then noise), so a seed
//! fully determines the instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use gabpfix_core::{normal_equations, RectMatrix, SparseSymMatrix};

#[derive(Debug, Error)]
pub enum CdmaError {
    #[error("need n >= k >= 1 users, got n = {n}, k = {k}")]
    BadShape { n: usize, k: usize },
    #[error("noise variance must be positive, got {0}")]
    BadNoise(f64),
}

/// Entry distribution of the spreading matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Spreading {
    /// Equiprobable +-1 chips.
    Binary,
    /// Equiprobable +-1/sqrt(n) chips (unit-norm columns in expectation).
    BinaryNorm,
}

#[derive(Debug, Clone, Serialize)]
pub struct CdmaConfig {
    /// Chip sequence length (rows of S).
    pub n: usize,
    /// Number of users (columns of S).
    pub k: usize,
    /// Noise variance, added to the diagonal of the correlation matrix.
    pub sigma2: f64,
    pub seed: u64,
    pub spreading: Spreading,
}

impl CdmaConfig {
    fn validate(&self) -> Result<(), CdmaError> {
        if self.k < 1 || self.n < self.k {
            return Err(CdmaError::BadShape {
                n: self.n,
                k: self.k,
            });
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(CdmaError::BadNoise(self.sigma2));
        }
        Ok(())
    }
}

/// Everything a detection experiment needs from one seeded draw.
pub struct CdmaInstance {
    pub s: RectMatrix,
    /// `C = S^T S` without the noise loading (its normalized off-diagonal
    /// radius decides whether plain message passing can converge).
    pub c: SparseSymMatrix,
    /// `A = C + sigma2 I`, the system actually solved.
    pub a: SparseSymMatrix,
    /// Matched-filter output `S^T (S x_true + noise)`.
    pub y: Vec<f64>,
    /// The transmitted symbols, for error-rate checks.
    pub x_true: Vec<f64>,
}

pub fn gen_cdma(config: &CdmaConfig) -> Result<CdmaInstance, CdmaError> {
    config.validate()?;
    let (n, k) = (config.n, config.k);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chip = match config.spreading {
        Spreading::Binary => 1.0,
        Spreading::BinaryNorm => 1.0 / (n as f64).sqrt(),
    };
    let mut entries = Vec::with_capacity(n * k);
    for r in 0..n {
        for c in 0..k {
            let sign = if rng.gen::<bool>() { chip } else { -chip };
            entries.push((r, c, sign));
        }
    }
    let s = RectMatrix::from_entries(n, k, entries).expect("spreading entries are well-formed");
    let x_true: Vec<f64> = (0..k)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let noise: Vec<f64> = (0..n)
        .map(|_| config.sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut channel = s.matvec(&x_true);
    for (z, w) in channel.iter_mut().zip(&noise) {
        *z += w;
    }
    let (c, y) = normal_equations(&s, &channel);
    let a = c
        .with_diag_added(&vec![config.sigma2; k])
        .expect("lengths match");
    Ok(CdmaInstance { s, c, a, y, x_true })
}
