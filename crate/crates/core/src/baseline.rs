//! Spectral pattern matching baseline.
//!
//! The observed weights of `ã` on the eigenbasis of `Σ̂_X` are explained as a
//! mix `(1 − β) ω^τ + β ω^ν` of a flat causal pattern and a confounding
//! pattern computed from `H_ν = Λ + (ν/n) 𝟏𝟏ᵀ`. A confounder is reported when
//! the fitted `β*` exceeds one half.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{empirical_covariances, regression_vector, Decision, RIDGE_FLOOR};
use crate::error::{Error, Result};
use crate::models::Dataset;
use crate::spectral::{eigendecompose, eigendecompose_psd, induced_measure, SymMatrix};

/// `β*` above this value is reported as a confounder.
pub const BETA_THRESHOLD: f64 = 0.5;

pub const NU_GRID_POINTS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    /// Gaussian smoothing along the eigenvalue axis before the Euclidean
    /// distance; the bandwidth is the median gap between sorted eigenvalues.
    Kernel,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "kernel" => Ok(Self::Kernel),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Euclidean => write!(f, "euclidean"),
            Self::Kernel => write!(f, "kernel"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternFit {
    pub beta_star: f64,
    pub nu_star: f64,
    pub reconstruction_error: f64,
    pub decision: Decision,
    pub metric: Metric,
}

/// The flat pattern `(1/n, …, 1/n)`.
pub fn causal_pattern(n: usize) -> DVector<f64> {
    assert!(n >= 1, "pattern dimension must be at least 1");
    DVector::from_element(n, 1.0 / n as f64)
}

/// Weights of `H_ν⁻¹𝟏` on the eigenbasis of `H_ν`, divided by `‖H_ν⁻¹𝟏‖²`.
///
/// Entry `i` of the result belongs to `Λ_i`: eigenvalues of `H_ν` are matched
/// to entries of `Λ` by rank.
pub fn confounding_pattern(lambda: &[f64], nu: f64) -> Result<DVector<f64>> {
    let n = lambda.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidSpectrum("pattern eigenvalues must be positive".into()));
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidConfig(format!("nu must be non-negative, got {nu}")));
    }
    let shift = nu / n as f64;
    let h = DMatrix::from_fn(n, n, |i, j| if i == j { lambda[i] + shift } else { shift });
    let h = SymMatrix::new(h)?;
    let eig = eigendecompose(&h)?;
    if !(eig.smallest() > 0.0) {
        return Err(Error::SingularMatrix);
    }
    let ones = DVector::from_element(n, 1.0);
    let h_inv_one = eig.apply_function(&ones, |l| 1.0 / l)?;
    let measure = induced_measure(&h_inv_one, &eig)?;
    let total = measure.mass();
    if !(total > 0.0) {
        return Err(Error::SingularMatrix);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lambda[j].total_cmp(&lambda[i]).then(i.cmp(&j)));
    let mut out = DVector::zeros(n);
    for (rank, &idx) in order.iter().enumerate() {
        out[idx] = measure.weights()[rank] / total;
    }
    Ok(out)
}

/// `β ∈ {0, 0.01, …, 1}`.
pub fn default_beta_grid() -> Vec<f64> {
    (0..=100).map(|k| k as f64 / 100.0).collect()
}

/// 25 log-spaced points on `[1e-3·trace, 1e3·trace]`.
pub fn default_nu_grid(trace: f64) -> Result<Vec<f64>> {
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::InvalidGrid(format!("trace must be positive, got {trace}")));
    }
    let (lo, hi) = ((1e-3 * trace).ln(), (1e3 * trace).ln());
    let steps = (NU_GRID_POINTS - 1) as f64;
    Ok((0..NU_GRID_POINTS)
        .map(|k| (lo + (hi - lo) * k as f64 / steps).exp())
        .collect())
}

struct Smoother(Option<DMatrix<f64>>);

impl Smoother {
    fn new(metric: Metric, lambda: &[f64]) -> Self {
        match metric {
            Metric::Euclidean => Self(None),
            Metric::Kernel => {
                let h = median_gap(lambda);
                if !(h > 0.0) {
                    return Self(None);
                }
                let n = lambda.len();
                let mut k = DMatrix::from_fn(n, n, |i, j| {
                    let d = (lambda[i] - lambda[j]) / h;
                    (-0.5 * d * d).exp()
                });
                for mut row in k.row_iter_mut() {
                    let s = row.sum();
                    row /= s;
                }
                Self(Some(k))
            }
        }
    }

    fn distance(&self, diff: &DVector<f64>) -> f64 {
        match &self.0 {
            None => diff.norm(),
            Some(k) => (k * diff).norm(),
        }
    }
}

fn median_gap(lambda: &[f64]) -> f64 {
    let mut sorted = lambda.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return 0.0;
    }
    gaps.sort_by(f64::total_cmp);
    let m = gaps.len();
    if m % 2 == 1 {
        gaps[m / 2]
    } else {
        0.5 * (gaps[m / 2 - 1] + gaps[m / 2])
    }
}

/// Grid search for `(β*, ν*)` minimizing the distance between `omega_hat`
/// and `(1 − β) ω^τ + β ω^ν`. Ties go to the smaller `β`, then the smaller
/// `ν` position in the grid.
pub fn fit(
    omega_hat: &DVector<f64>,
    lambda: &[f64],
    beta_grid: &[f64],
    nu_grid: &[f64],
    metric: Metric,
) -> Result<PatternFit> {
    if beta_grid.is_empty() || nu_grid.is_empty() {
        return Err(Error::InvalidGrid("beta and nu grids must be non-empty".into()));
    }
    if beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::InvalidGrid("beta values must lie in [0, 1]".into()));
    }
    let n = lambda.len();
    if omega_hat.len() != n {
        return Err(Error::DimensionError {
            expected: n,
            found: omega_hat.len(),
        });
    }
    let tau = causal_pattern(n);
    let smoother = Smoother::new(metric, lambda);

    let patterns: Vec<DVector<f64>> = nu_grid
        .par_iter()
        .map(|&nu| confounding_pattern(lambda, nu))
        .collect::<Result<_>>()?;

    // (error, beta index, nu index), smallest beta first on ties.
    let best = beta_grid
        .par_iter()
        .enumerate()
        .map(|(bi, &beta)| {
            let mut best = (f64::INFINITY, bi, usize::MAX);
            for (ni, pattern) in patterns.iter().enumerate() {
                let recon = &tau * (1.0 - beta) + pattern * beta;
                let err = smoother.distance(&(omega_hat - recon));
                if err < best.0 || best.2 == usize::MAX {
                    best = (err, bi, ni);
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None::<(f64, usize, usize)>, |acc, cand| match acc {
            Some(a) if a.0 <= cand.0 => Some(a),
            _ => Some(cand),
        })
        .expect("grids are non-empty");

    let (err, bi, ni) = best;
    let beta_star = beta_grid[bi];
    Ok(PatternFit {
        beta_star,
        nu_star: nu_grid[ni],
        reconstruction_error: err,
        decision: if beta_star > BETA_THRESHOLD {
            Decision::Confounder
        } else {
            Decision::NoConfounder
        },
        metric,
    })
}

/// Observed pattern `ω̂ / ‖ã‖²` on the eigenvalues of `Σ_X`, floored so that
/// every eigenvalue is positive.
pub fn observed_pattern(sigma_x: &SymMatrix, sigma_xy: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>)> {
    let reg = regression_vector(sigma_x, sigma_xy)?;
    let eig = eigendecompose_psd(sigma_x)?;
    let measure = induced_measure(&reg.coefficients, &eig)?;
    let total = measure.mass();
    if !(total > 0.0) {
        return Err(Error::InvalidMatrix("regression vector is zero".into()));
    }
    let floor = RIDGE_FLOOR * eig.largest();
    let lambda = eig.eigenvalues().iter().map(|&l| l.max(floor)).collect();
    Ok((measure.weights() / total, lambda))
}

/// Pattern fit from (population or estimated) second moments.
pub fn js_fit_moments(sigma_x: &SymMatrix, sigma_xy: &DVector<f64>, metric: Metric) -> Result<PatternFit> {
    let (omega_hat, lambda) = observed_pattern(sigma_x, sigma_xy)?;
    let trace: f64 = lambda.iter().sum();
    fit(&omega_hat, &lambda, &default_beta_grid(), &default_nu_grid(trace)?, metric)
}

pub fn js_detect(data: &Dataset) -> Result<PatternFit> {
    js_detect_with(data, Metric::Euclidean)
}

pub fn js_detect_with(data: &Dataset, metric: Metric) -> Result<PatternFit> {
    let (sigma_x, sigma_xy) = empirical_covariances(data)?;
    js_fit_moments(&sigma_x, &sigma_xy, metric)
}
