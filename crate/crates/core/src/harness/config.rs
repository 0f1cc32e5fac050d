use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::Metric;
use crate::detector::DEFAULT_GAMMA;
use crate::error::{Error, Result};
use crate::models::{CSpec, CoefficientFamily, ModelParams, NoiseKind, SpectrumSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Ours,
    Js,
    Both,
}

impl Method {
    pub fn ours(self) -> bool {
        matches!(self, Self::Ours | Self::Both)
    }

    pub fn js(self) -> bool {
        matches!(self, Self::Js | Self::Both)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Self::Ours),
            "js" => Ok(Self::Js),
            "both" => Ok(Self::Both),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ours => write!(f, "ours"),
            Self::Js => write!(f, "js"),
            Self::Both => write!(f, "both"),
        }
    }
}

/// One simulated experiment. `samples = 0` uses population covariances
/// instead of drawing data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: Vec<usize>,
    #[serde(rename = "L", alias = "samples")]
    pub samples: usize,
    pub runs: usize,
    pub c: CSpec,
    pub coeffs: CoefficientFamily,
    pub noise: NoiseKind,
    pub spectrum: SpectrumSpec,
    pub gamma: f64,
    pub seed: u64,
    pub method: Method,
    /// Distance used by the pattern-matching baseline.
    pub metric: Metric,
    pub r_a: f64,
    pub r_b: f64,
    pub f_std: f64,
    /// Rescale each simulated dataset to unit variance before testing.
    pub normalize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: vec![10],
            samples: 500,
            runs: 200,
            c: CSpec::Zero,
            coeffs: CoefficientFamily::Normal,
            noise: NoiseKind::Gaussian,
            spectrum: SpectrumSpec::default(),
            gamma: DEFAULT_GAMMA,
            seed: 0,
            method: Method::Ours,
            metric: Metric::Euclidean,
            r_a: 1.0,
            r_b: 1.0,
            f_std: 1.0,
            normalize: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::InvalidConfig("dimension list must be non-empty and positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.samples == 1 {
            return Err(Error::InvalidConfig("L must be 0 (population) or at least 2".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.r_a > 0.0 && self.r_b > 0.0 && self.f_std >= 0.0) {
            return Err(Error::InvalidConfig("radii must be positive and f_std non-negative".into()));
        }
        if let CSpec::Uniform { lo, hi } = self.c {
            if !(lo <= hi) {
                return Err(Error::InvalidConfig(format!("empty c range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Model parameters for dimension `n` with a given confounder weight.
    pub fn model_params(&self, n: usize, c: f64) -> ModelParams {
        ModelParams {
            n,
            r_a: self.r_a,
            r_b: self.r_b,
            c,
            coeffs: self.coeffs,
            spectrum: self.spectrum,
            noise: self.noise,
            f_std: self.f_std,
        }
    }

    pub fn is_population(&self) -> bool {
        self.samples == 0
    }
}
