//! The first-moment deviation statistic and its asymptotic theory.
//!
//! For a vector `φ` and symmetric `Σ`,
//! `D(φ, Σ) = |φᵀΣφ − ‖φ‖² τ_n(Σ)|` with `τ_n = tr / n`. In the confounded
//! model `X = bZ + E`, `Y = aᵀX + cZ + F` the deviation of the regression
//! vector converges to a value determined by the tracial moments of the
//! noise covariance `Σ_E`, its inverse and its squared inverse.

use std::f64::consts::E;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{check_dim, quadratic_moment, renormalized_trace, solve_positive_definite, SymMatrix};

/// `D(φ, Σ)` together with the two moments it compares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationValue {
    pub value: f64,
    /// `φᵀΣφ`
    pub moment_induced: f64,
    /// `‖φ‖² τ_n(Σ)`
    pub moment_tracial_scaled: f64,
    pub norm_sq_phi: f64,
}

pub fn deviation(phi: &DVector<f64>, m: &SymMatrix) -> Result<DeviationValue> {
    check_dim(m.dim(), phi.len())?;
    let moment_induced = quadratic_moment(phi, m)?;
    let norm_sq_phi = phi.norm_squared();
    let moment_tracial_scaled = norm_sq_phi * renormalized_trace(m);
    Ok(DeviationValue {
        value: (moment_induced - moment_tracial_scaled).abs(),
        moment_induced,
        moment_tracial_scaled,
        norm_sq_phi,
    })
}

/// The trace-condition discrepancy `|tr(aᵀΣa) − τ_n(Σ) tr(a aᵀ)|`, written
/// with explicit 1×1 and rank-one matrices. Numerically the same quantity as
/// [`deviation`].
pub fn trace_condition_gap(a: &DVector<f64>, m: &SymMatrix) -> Result<f64> {
    check_dim(m.dim(), a.len())?;
    let lhs = (a.transpose() * m.as_matrix() * a).trace();
    let outer = a * a.transpose();
    Ok((lhs - renormalized_trace(m) * outer.trace()).abs())
}

/// Limits of the tracial moments of `Σ_E`, `Σ_E⁻¹` and `Σ_E⁻²`.
///
/// `tau_rb2` is the `τ_∞(r_b²)` term coming from the rank-one part of
/// `Σ_X = Σ_E + bbᵀ`; it vanishes in the limit but is kept explicit.
/// `tau_unit` is `τ_∞(1)`, the normalized trace of a single unit entry
/// (`1/n` at finite `n`, zero in the limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMoments {
    pub m1: f64,
    pub m_neg1: f64,
    pub m_neg2: f64,
    #[serde(default)]
    pub tau_rb2: f64,
    #[serde(default)]
    pub tau_unit: f64,
}

impl AsymptoticMoments {
    pub fn bounded(m1: f64, m_neg1: f64, m_neg2: f64) -> Self {
        Self {
            m1,
            m_neg1,
            m_neg2,
            tau_rb2: 0.0,
            tau_unit: 0.0,
        }
    }

    /// Moments of the constant spectrum `σ_i = σ₁`.
    pub fn constant(sigma1: f64) -> Self {
        Self::bounded(sigma1, 1.0 / sigma1, 1.0 / (sigma1 * sigma1))
    }

    /// Finite-`n` moments of a given spectrum, with `τ(r_b²) = r_b²/n` and
    /// `τ(1) = 1/n`. Fails with `UnboundedMoments` if the inverse moments
    /// overflow.
    pub fn from_spectrum(spectrum: &[f64], r_b: f64) -> Result<Self> {
        let traces = InverseTraces::of(spectrum)?;
        let n = spectrum.len() as f64;
        let mom = Self {
            m1: traces.t0,
            m_neg1: traces.t1,
            m_neg2: traces.t2,
            tau_rb2: r_b * r_b / n,
            tau_unit: 1.0 / n,
        };
        if mom.is_finite() {
            Ok(mom)
        } else {
            Err(Error::UnboundedMoments)
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.m1, self.m_neg1, self.m_neg2, self.tau_rb2, self.tau_unit]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Positivity and `M₋₁ ≤ M₋₂ M₁` (Chebyshev's sum inequality).
    pub fn is_consistent(&self) -> bool {
        self.is_finite()
            && self.m1 > 0.0
            && self.m_neg1 > 0.0
            && self.m_neg2 > 0.0
            && self.m_neg1 <= self.m_neg2 * self.m1 * (1.0 + 1e-12)
    }
}

/// `(τ(Σ), τ(Σ⁻¹), τ(Σ⁻²))` for a diagonal spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseTraces {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
}

impl InverseTraces {
    pub fn of(spectrum: &[f64]) -> Result<Self> {
        validate_spectrum(spectrum)?;
        let n = spectrum.len() as f64;
        let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
        for &s in spectrum {
            t0 += s;
            t1 += 1.0 / s;
            t2 += 1.0 / (s * s);
        }
        Ok(Self {
            t0: t0 / n,
            t1: t1 / n,
            t2: t2 / n,
        })
    }
}

/// Asymptotic deviation of the regression vector under confounding:
///
/// `c² r_b² / (1 + r_b² M₋₁)² · |M₋₁ − M₋₂ M₁ + r_b² M₋₁² − τ(r_b²) M₋₂|`.
pub fn asymptotic_deviation(c: f64, r_b: f64, mom: &AsymptoticMoments) -> Result<f64> {
    if !mom.is_finite() || !c.is_finite() || !r_b.is_finite() {
        return Err(Error::UnboundedMoments);
    }
    let rb2 = r_b * r_b;
    let denom = 1.0 + rb2 * mom.m_neg1;
    if denom <= 0.0 {
        return Err(Error::InvalidSpectrum(format!(
            "1 + r_b² M(μ₋₁) = {denom} must be positive"
        )));
    }
    let inner = mom.m_neg1 - mom.m_neg2 * mom.m1 + rb2 * mom.m_neg1 * mom.m_neg1
        - mom.tau_rb2 * mom.m_neg2;
    Ok(c * c * rb2 / (denom * denom) * inner.abs())
}

/// The three ratios whose limits give the deviation when the inverse
/// moments of `Σ_E` are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaTerms {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl ThetaTerms {
    /// `c² r_b² |θ1 − θ2 − θ3|`.
    pub fn deviation(&self, c: f64, r_b: f64) -> f64 {
        c * c * r_b * r_b * (self.theta1 - self.theta2 - self.theta3).abs()
    }
}

/// Finite-`n` theta terms of a positive spectrum:
///
/// ```text
/// θ1 = τ(Σ⁻¹) / (1 + r_b² τ(Σ⁻¹))
/// θ2 = τ(Σ⁻²) τ(Σ) / (1 + r_b² τ(Σ⁻¹))²
/// θ3 = r_b² τ(Σ⁻²) / (n (1 + r_b² τ(Σ⁻¹))²)
/// ```
///
/// Inverse traces are accumulated relative to `1/σ_min`, so fast-decaying
/// spectra whose raw inverse moments overflow still evaluate.
pub fn finite_n_theta_terms(spectrum: &[f64], r_b: f64) -> Result<ThetaTerms> {
    theta_terms(&ScaledTraces::of(spectrum)?, r_b)
}

/// [`finite_n_theta_terms`] from the logarithms of the eigenvalues.
pub fn finite_n_theta_terms_from_logs(log_spectrum: &[f64], r_b: f64) -> Result<ThetaTerms> {
    theta_terms(&ScaledTraces::of_logs(log_spectrum)?, r_b)
}

fn theta_terms(scaled: &ScaledTraces, r_b: f64) -> Result<ThetaTerms> {
    let rb2 = r_b * r_b;
    // (1 + r_b² τ(Σ⁻¹)) / k with k = 1/σ_min.
    let d = scaled.sigma_min + rb2 * scaled.u1;
    if !(d > 0.0) {
        return Err(Error::InvalidSpectrum("degenerate theta denominator".into()));
    }
    Ok(ThetaTerms {
        theta1: scaled.u1 / d,
        theta2: scaled.u2 * scaled.t0 / (d * d),
        theta3: rb2 * scaled.u2 / (scaled.n * d * d),
    })
}

/// Case studies of the noise spectrum with closed-form asymptotic deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosedFormKind {
    /// `σ_i = σ₁`
    Constant,
    /// `σ_i = σ₁ / i`
    Polynomial,
    /// `σ_i = σ₁ e^{-(i-1)}`
    Exponential,
}

impl std::str::FromStr for ClosedFormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "poly" | "polynomial" => Ok(Self::Polynomial),
            "exp" | "exponential" => Ok(Self::Exponential),
            other => Err(Error::InvalidConfig(format!("unknown spectrum kind `{other}`"))),
        }
    }
}

pub fn closed_form(kind: ClosedFormKind, c: f64, r_b: f64, sigma1: f64) -> f64 {
    let c2 = c * c;
    let rb2 = r_b * r_b;
    match kind {
        ClosedFormKind::Constant => {
            c2 * rb2 * rb2 / (sigma1 * sigma1 + 2.0 * sigma1 * rb2 + rb2 * rb2)
        }
        ClosedFormKind::Polynomial => c2,
        ClosedFormKind::Exponential => {
            c2 * (2.0 / (E + 1.0) - E * sigma1 / ((E + 1.0) * rb2)).abs()
        }
    }
}

const RADIUS_TOLERANCE: f64 = 1e-12;

/// The `r_b²` at which the asymptotic deviation vanishes:
/// `(M₋₂M₁ − M₋₁) / (M₋₁² − τ(1) M₋₂)`, which is
/// `M₋₂M₁/M₋₁² − 1/M₋₁` when `τ(1) = 0`.
///
/// Returns `None` when no positive radius satisfies the condition.
pub fn nonidentifiable_radius_sq(mom: &AsymptoticMoments) -> Option<f64> {
    if !mom.is_finite() {
        return None;
    }
    let lead = mom.m_neg2 * mom.m1;
    let num = lead - mom.m_neg1;
    let den = mom.m_neg1 * mom.m_neg1 - mom.tau_unit * mom.m_neg2;
    positive_ratio(num, den, lead)
}

/// Finite-`n` non-identifiable radius of a spectrum, using `τ(1) = 1/n` and
/// the same overflow-free scaling as [`finite_n_theta_terms`].
pub fn nonidentifiable_radius_sq_from_spectrum(spectrum: &[f64]) -> Result<Option<f64>> {
    Ok(scaled_radius(&ScaledTraces::of(spectrum)?))
}

/// [`nonidentifiable_radius_sq_from_spectrum`] from the logarithms of the
/// eigenvalues.
pub fn nonidentifiable_radius_sq_from_logs(log_spectrum: &[f64]) -> Result<Option<f64>> {
    Ok(scaled_radius(&ScaledTraces::of_logs(log_spectrum)?))
}

fn scaled_radius(s: &ScaledTraces) -> Option<f64> {
    // numerator and denominator both divided by k² = σ_min⁻².
    let lead = s.u2 * s.t0;
    let num = lead - s.u1 * s.sigma_min;
    let den = s.u1 * s.u1 - s.u2 / s.n;
    positive_ratio(num, den, lead)
}

/// `num / den` when both are positive, with `num` below `1e-12 · scale`
/// treated as zero.
fn positive_ratio(num: f64, den: f64, scale: f64) -> Option<f64> {
    if num <= RADIUS_TOLERANCE * scale.abs() {
        return None;
    }
    let r = num / den;
    (den > 0.0 && r.is_finite()).then_some(r)
}

/// `(Σ_E + bbᵀ)⁻¹ b = Σ_E⁻¹b / (1 + bᵀΣ_E⁻¹b)`, given the action of `Σ_E⁻¹`.
pub fn sherman_morrison_solve_with<F>(apply_inverse: F, b: &DVector<f64>) -> Result<DVector<f64>>
where
    F: FnOnce(&DVector<f64>) -> Result<DVector<f64>>,
{
    let inv_b = apply_inverse(b)?;
    check_dim(b.len(), inv_b.len())?;
    let denom = 1.0 + b.dot(&inv_b);
    if !denom.is_finite() || denom == 0.0 {
        return Err(Error::SingularMatrix);
    }
    Ok(inv_b / denom)
}

pub fn sherman_morrison_solve(sigma_e: &SymMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(sigma_e.dim(), b.len())?;
    sherman_morrison_solve_with(|v| solve_positive_definite(sigma_e, v), b)
}

struct ScaledTraces {
    n: f64,
    sigma_min: f64,
    t0: f64,
    /// `τ(Σ⁻¹) · σ_min`
    u1: f64,
    /// `τ(Σ⁻²) · σ_min²`
    u2: f64,
}

impl ScaledTraces {
    fn of(spectrum: &[f64]) -> Result<Self> {
        validate_spectrum(spectrum)?;
        let logs: Vec<f64> = spectrum.iter().map(|s| s.ln()).collect();
        Self::of_logs(&logs)
    }

    /// Same sums from `ln σ_i`, for spectra whose small eigenvalues underflow.
    fn of_logs(logs: &[f64]) -> Result<Self> {
        if logs.is_empty() {
            return Err(Error::InvalidSpectrum("empty spectrum".into()));
        }
        if let Some(bad) = logs.iter().find(|l| !l.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("log eigenvalue {bad} is not finite")));
        }
        let n = logs.len() as f64;
        let log_min = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut t0, mut u1, mut u2) = (0.0, 0.0, 0.0);
        for &l in logs {
            let r = (log_min - l).exp();
            t0 += l.exp();
            u1 += r;
            u2 += r * r;
        }
        Ok(Self {
            n,
            sigma_min: log_min.exp(),
            t0: t0 / n,
            u1: u1 / n,
            u2: u2 / n,
        })
    }
}

fn validate_spectrum(spectrum: &[f64]) -> Result<()> {
    if spectrum.is_empty() {
        return Err(Error::InvalidSpectrum("empty spectrum".into()));
    }
    if let Some(bad) = spectrum.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::InvalidSpectrum(format!(
            "eigenvalues must be positive and finite, found {bad}"
        )));
    }
    Ok(())
}
