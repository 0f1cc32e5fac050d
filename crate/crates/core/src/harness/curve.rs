use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_POINTS: usize = 200;

/// Empirical `P(value ≥ threshold)` over a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceCurve {
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ExceedanceCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.thresholds.iter().copied().zip(self.probabilities.iter().copied())
    }
}

pub fn exceedance_curve(values: &[f64], thresholds: &[f64]) -> Result<ExceedanceCurve> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let probabilities = thresholds
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&v| v < t);
            (sorted.len() - below) as f64 / total
        })
        .collect();
    Ok(ExceedanceCurve {
        thresholds,
        probabilities,
    })
}

/// Evenly spaced points from 0 to the largest observed value.
pub fn default_thresholds(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    let steps = (DEFAULT_THRESHOLD_POINTS - 1) as f64;
    (0..DEFAULT_THRESHOLD_POINTS).map(|k| max * k as f64 / steps).collect()
}
