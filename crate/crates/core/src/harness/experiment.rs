use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::curve::{default_thresholds, exceedance_curve, ExceedanceCurve};
use super::stream_id;
use crate::baseline::{js_fit_moments, PatternFit};
use crate::detector::{decide, detect, empirical_covariances, normalize_unit_variance, Decision};
use crate::deviation::deviation;
use crate::error::{Error, Result};
use crate::models::{build_model, population_quantities, run_rng, sample, CSpec};

const ARM_MAIN: u64 = 0;
const ARM_CONFOUNDED: u64 = 1;
const ARM_NULL: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub run: usize,
    pub c: f64,
    pub d: f64,
    pub decision: Decision,
    pub ill_conditioned: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub js: Option<PatternFit>,
}

impl RunRecord {
    pub fn truth(&self) -> Decision {
        if self.c != 0.0 {
            Decision::Confounder
        } else {
            Decision::NoConfounder
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub n: usize,
    pub arm: u64,
    pub run: usize,
    pub message: String,
}

/// One run: draw `c` and a model, then compute `D` from population
/// covariances (`samples = 0`) or from a drawn dataset.
pub fn evaluate_run(config: &ExperimentConfig, c_spec: &CSpec, n: usize, arm: u64, run: usize) -> Result<RunRecord> {
    let mut rng = run_rng(config.seed, stream_id(n, arm, run));
    let c = c_spec.draw(&mut rng);
    let model = build_model(&config.model_params(n, c), &mut rng)?;
    let with_js = |sx, sxy| -> Result<Option<PatternFit>> {
        if config.method.js() {
            js_fit_moments(sx, sxy, config.metric).map(Some)
        } else {
            Ok(None)
        }
    };
    if config.is_population() {
        let pop = population_quantities(&model)?;
        let d = deviation(&pop.regression, &pop.sigma_x)?.value;
        let js = with_js(&pop.sigma_x, &pop.sigma_xy)?;
        return Ok(RunRecord {
            n,
            run,
            c,
            d,
            decision: decide(d, config.gamma),
            ill_conditioned: false,
            js,
        });
    }
    let mut data = sample(&model, config.samples, &mut rng)?;
    if config.normalize {
        data = normalize_unit_variance(&data)?;
    }
    let report = detect(&data, config.gamma)?;
    let js = if config.method.js() {
        let (sx, sxy) = empirical_covariances(&data)?;
        with_js(&sx, &sxy)?
    } else {
        None
    };
    Ok(RunRecord {
        n,
        run,
        c,
        d: report.d_hat,
        decision: report.decision,
        ill_conditioned: report.ill_conditioned,
        js,
    })
}

fn run_arm(
    config: &ExperimentConfig,
    c_spec: &CSpec,
    n: usize,
    arm: u64,
    runs: usize,
) -> (Vec<RunRecord>, Vec<RunFailure>) {
    let outcomes: Vec<Result<RunRecord>> = (0..runs)
        .into_par_iter()
        .map(|run| evaluate_run(config, c_spec, n, arm, run))
        .collect();
    let mut records = Vec::with_capacity(runs);
    let mut failures = Vec::new();
    for (run, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push(RunFailure {
                n,
                arm,
                run,
                message: e.to_string(),
            }),
        }
    }
    (records, failures)
}

/// Per-dimension output of [`run_distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub records: Vec<RunRecord>,
    pub curve: ExceedanceCurve,
    pub failures: Vec<RunFailure>,
}

impl Distribution {
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d).collect()
    }

    /// Fraction of runs with `D ≥ t`.
    pub fn exceedance_at(&self, t: f64) -> f64 {
        let hits = self.records.iter().filter(|r| r.d >= t).count();
        hits as f64 / self.records.len() as f64
    }
}

pub fn run_distribution(config: &ExperimentConfig) -> Result<Vec<Distribution>> {
    config.validate()?;
    config
        .n
        .iter()
        .map(|&n| {
            let (records, failures) = run_arm(config, &config.c, n, ARM_MAIN, config.runs);
            if records.is_empty() {
                return Err(Error::InsufficientData(format!("all {} runs failed at n = {n}", config.runs)));
            }
            let values: Vec<f64> = records.iter().map(|r| r.d).collect();
            let curve = exceedance_curve(&values, &default_thresholds(&values))?;
            Ok(Distribution {
                n,
                records,
                curve,
                failures,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub c: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub samples: usize,
    pub runs: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub failures: Vec<RunFailure>,
}

impl BenchmarkTable {
    pub fn extend(&mut self, other: BenchmarkTable) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
    }

    pub fn accuracy(&self, method: Method, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.n == n)
            .map(|r| r.accuracy)
    }
}

/// Accuracy in percent: a run is correct when the decision matches whether
/// its drawn `c` is non-zero.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkTable> {
    config.validate()?;
    let mut table = BenchmarkTable::default();
    for &n in &config.n {
        let (records, failures) = run_arm(config, &config.c, n, ARM_MAIN, config.runs);
        if records.is_empty() {
            return Err(Error::InsufficientData(format!("all {} runs failed at n = {n}", config.runs)));
        }
        let mut methods = Vec::new();
        if config.method.ours() {
            methods.push(Method::Ours);
        }
        if config.method.js() {
            methods.push(Method::Js);
        }
        for method in methods {
            let correct = records
                .iter()
                .filter(|r| {
                    let decision = match method {
                        Method::Js => r.js.expect("baseline requested").decision,
                        _ => r.decision,
                    };
                    decision == r.truth()
                })
                .count();
            table.rows.push(BenchmarkRow {
                method,
                c: config.c.to_string(),
                n,
                samples: config.samples,
                runs: records.len(),
                correct,
                accuracy: 100.0 * correct as f64 / records.len() as f64,
                failures: failures.len(),
            });
        }
        table.failures.extend(failures);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub gamma: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub failures: Vec<RunFailure>,
}

impl SweepResult {
    /// First threshold attaining the largest `TPR − FPR` at dimension `n`.
    pub fn best_gamma(&self, n: usize) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.n == n)
            .fold(None::<SweepPoint>, |best, p| match best {
                Some(b) if b.tpr - b.fpr >= p.tpr - p.fpr => Some(b),
                _ => Some(*p),
            })
            .map(|p| p.gamma)
    }
}

/// TPR over runs drawn with the configured `c`, FPR over runs with `c = 0`;
/// `config.runs` runs per arm.
pub fn threshold_sweep(config: &ExperimentConfig, gammas: &[f64]) -> Result<SweepResult> {
    config.validate()?;
    if !config.c.is_confounded() {
        return Err(Error::InvalidConfig("sweep needs a confounded c generator".into()));
    }
    if gammas.is_empty() {
        return Err(Error::InvalidGrid("no thresholds given".into()));
    }
    let mut gammas = gammas.to_vec();
    gammas.sort_by(f64::total_cmp);
    let mut points = Vec::new();
    let mut all_failures = Vec::new();
    for &n in &config.n {
        let (pos, f1) = run_arm(config, &config.c, n, ARM_CONFOUNDED, config.runs);
        let (neg, f2) = run_arm(config, &CSpec::Zero, n, ARM_NULL, config.runs);
        if pos.is_empty() || neg.is_empty() {
            return Err(Error::InsufficientData(format!("an arm had no successful runs at n = {n}")));
        }
        let rate = |records: &[RunRecord], g: f64| {
            records.iter().filter(|r| r.d > g).count() as f64 / records.len() as f64
        };
        for &gamma in &gammas {
            points.push(SweepPoint {
                n,
                gamma,
                tpr: rate(&pos, gamma),
                fpr: rate(&neg, gamma),
            });
        }
        all_failures.extend(f1);
        all_failures.extend(f2);
    }
    Ok(SweepResult {
        points,
        failures: all_failures,
    })
}
