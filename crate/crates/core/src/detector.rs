//! Plug-in confounder detector.
//!
//! 1. Estimate `Σ̂_X` and `Σ̂_XY` from the data.
//! 2. Regress: `ã = Σ̂_X⁻¹ Σ̂_XY`.
//! 3. `D̂ = |ãᵀΣ̂_Xã − ‖ã‖² τ_n(Σ̂_X)|`.
//! 4. Report a confounder iff `D̂ > γ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::deviation::deviation;
use crate::error::{Error, Result};
use crate::models::Dataset;
use crate::spectral::{check_dim, eigendecompose_psd, SymMatrix};

/// Threshold used when none is given.
pub const DEFAULT_GAMMA: f64 = 0.5;

/// Eigenvalues below this fraction of `λ_1` are floored when inverting `Σ̂_X`.
pub const RIDGE_FLOOR: f64 = 1e-10;

/// Condition numbers above this are flagged in reports.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    NoConfounder,
    Confounder,
}

impl Decision {
    pub fn is_confounder(self) -> bool {
        self == Self::Confounder
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NoConfounder => write!(f, "no confounder"),
            Self::Confounder => write!(f, "confounder"),
        }
    }
}

/// `D̂ ≤ γ` means no confounder.
pub fn decide(d_hat: f64, gamma: f64) -> Decision {
    if d_hat <= gamma {
        Decision::NoConfounder
    } else {
        Decision::Confounder
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub d_hat: f64,
    #[serde(skip)]
    pub regression_vector: DVector<f64>,
    pub gamma: f64,
    pub decision: Decision,
    pub n: usize,
    #[serde(rename = "L")]
    pub samples: usize,
    pub condition_number: f64,
    pub normalized: bool,
    #[serde(skip)]
    pub ill_conditioned: bool,
}

/// Mean-centred sample covariances with denominator `L − 1`.
pub fn empirical_covariances(data: &Dataset) -> Result<(SymMatrix, DVector<f64>)> {
    let l = data.len();
    if l < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance estimation needs at least 2 observations, got {l}"
        )));
    }
    if data.n() == 0 {
        return Err(Error::InsufficientData("dataset has no feature columns".into()));
    }
    let x_mean = data.x.row_mean();
    let y_mean = data.y.mean();
    let mut xc = data.x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = data.y.add_scalar(-y_mean);
    let denom = (l - 1) as f64;
    let sigma_x = SymMatrix::new(xc.tr_mul(&xc) / denom)?;
    let sigma_xy = xc.tr_mul(&yc) / denom;
    Ok((sigma_x, sigma_xy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSolution {
    pub coefficients: DVector<f64>,
    pub condition_number: f64,
    pub ill_conditioned: bool,
}

/// Solves `Σ̂_X ã = Σ̂_XY` through the eigendecomposition of `Σ̂_X`, flooring
/// eigenvalues at `RIDGE_FLOOR · λ_1`.
pub fn regression_vector(sigma_x: &SymMatrix, sigma_xy: &DVector<f64>) -> Result<RegressionSolution> {
    check_dim(sigma_x.dim(), sigma_xy.len())?;
    let eig = eigendecompose_psd(sigma_x)?;
    let top = eig.largest();
    if !(top > 0.0) {
        return Err(Error::SingularMatrix);
    }
    let floor = RIDGE_FLOOR * top;
    let coefficients = eig.apply_function(sigma_xy, |l| 1.0 / l.max(floor))?;
    let condition_number = eig.condition_number();
    Ok(RegressionSolution {
        coefficients,
        condition_number,
        ill_conditioned: condition_number > ILL_CONDITIONED,
    })
}

/// Empirical deviation `D̂` of the regression vector.
pub fn empirical_deviation(data: &Dataset) -> Result<f64> {
    let (sigma_x, sigma_xy) = empirical_covariances(data)?;
    let reg = regression_vector(&sigma_x, &sigma_xy)?;
    Ok(deviation(&reg.coefficients, &sigma_x)?.value)
}

pub fn detect(data: &Dataset, gamma: f64) -> Result<DeviationReport> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be non-negative, got {gamma}")));
    }
    let (sigma_x, sigma_xy) = empirical_covariances(data)?;
    let reg = regression_vector(&sigma_x, &sigma_xy)?;
    let d_hat = deviation(&reg.coefficients, &sigma_x)?.value;
    if !d_hat.is_finite() {
        return Err(Error::InvalidMatrix("deviation is not finite".into()));
    }
    Ok(DeviationReport {
        d_hat,
        regression_vector: reg.coefficients,
        gamma,
        decision: decide(d_hat, gamma),
        n: data.n(),
        samples: data.len(),
        condition_number: reg.condition_number,
        normalized: data.normalized,
        ill_conditioned: reg.ill_conditioned,
    })
}

/// Scales every feature column and the target to unit sample variance.
pub fn normalize_unit_variance(data: &Dataset) -> Result<Dataset> {
    let l = data.len();
    if l < 2 {
        return Err(Error::InsufficientData(format!(
            "normalization needs at least 2 observations, got {l}"
        )));
    }
    let mut x = DMatrix::zeros(l, data.n());
    for (j, col) in data.x.column_iter().enumerate() {
        let sd = sample_sd(col.iter().copied());
        if !(sd > 0.0) {
            return Err(Error::DegenerateColumn(data.feature_names[j].clone()));
        }
        x.set_column(j, &(col / sd));
    }
    let sd = sample_sd(data.y.iter().copied());
    if !(sd > 0.0) {
        return Err(Error::DegenerateColumn(data.target_name.clone()));
    }
    Ok(Dataset {
        x,
        y: &data.y / sd,
        normalized: true,
        feature_names: data.feature_names.clone(),
        target_name: data.target_name.clone(),
    })
}

fn sample_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (count, sum) = values.clone().fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    let mean = sum / count as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (count - 1) as f64).sqrt()
}
