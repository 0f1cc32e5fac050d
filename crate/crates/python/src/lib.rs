//! Python bindings. Matrices are passed as lists of rows, vectors as lists.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use spectral_confound::baseline::{self, Metric};
use spectral_confound::detector::{self, DEFAULT_GAMMA};
use spectral_confound::deviation::{self as dev, AsymptoticMoments, ClosedFormKind};
use spectral_confound::harness::{self, AnalyzeOptions, ExperimentConfig, Method};
use spectral_confound::models::{self as model_gen, CSpec, Dataset, SpectrumSpec};
use spectral_confound::spectral::SymMatrix;
use spectral_confound::{DMatrix, DVector, Error};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("expected a non-empty rectangular list of rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn dataset(x: &[Vec<f64>], y: Vec<f64>) -> PyResult<Dataset> {
    Dataset::new(matrix(x)?, DVector::from_vec(y)).map_err(py_err)
}

/// Outcome of the deviation detector on one dataset.
#[pyclass(frozen, get_all, skip_from_py_object, module = "spectral_confound")]
#[derive(Clone)]
pub struct DeviationReport {
    pub d_hat: f64,
    pub gamma: f64,
    pub confounder: bool,
    pub n: usize,
    pub samples: usize,
    pub condition_number: f64,
    pub normalized: bool,
    pub ill_conditioned: bool,
    pub regression_vector: Vec<f64>,
}

impl From<detector::DeviationReport> for DeviationReport {
    fn from(r: detector::DeviationReport) -> Self {
        Self {
            d_hat: r.d_hat,
            gamma: r.gamma,
            confounder: r.decision.is_confounder(),
            n: r.n,
            samples: r.samples,
            condition_number: r.condition_number,
            normalized: r.normalized,
            ill_conditioned: r.ill_conditioned,
            regression_vector: r.regression_vector.iter().copied().collect(),
        }
    }
}

#[pymethods]
impl DeviationReport {
    fn __repr__(&self) -> String {
        format!(
            "DeviationReport(d_hat={}, gamma={}, confounder={}, n={}, L={})",
            self.d_hat, self.gamma, self.confounder, self.n, self.samples
        )
    }
}

/// Result of the spectral pattern-matching baseline.
#[pyclass(frozen, get_all, skip_from_py_object, module = "spectral_confound")]
#[derive(Clone)]
pub struct PatternFit {
    pub beta_star: f64,
    pub nu_star: f64,
    pub reconstruction_error: f64,
    pub confounder: bool,
    pub metric: String,
}

impl From<baseline::PatternFit> for PatternFit {
    fn from(f: baseline::PatternFit) -> Self {
        Self {
            beta_star: f.beta_star,
            nu_star: f.nu_star,
            reconstruction_error: f.reconstruction_error,
            confounder: f.decision.is_confounder(),
            metric: f.metric.to_string(),
        }
    }
}

#[pymethods]
impl PatternFit {
    fn __repr__(&self) -> String {
        format!(
            "PatternFit(beta_star={}, nu_star={}, confounder={}, metric={})",
            self.beta_star, self.nu_star, self.confounder, self.metric
        )
    }
}

/// `|φᵀΣφ − ‖φ‖² tr(Σ)/n|`
#[pyfunction]
fn deviation(phi: Vec<f64>, sigma: Vec<Vec<f64>>) -> PyResult<f64> {
    let m = SymMatrix::from_rows(&sigma).map_err(py_err)?;
    Ok(dev::deviation(&DVector::from_vec(phi), &m).map_err(py_err)?.value)
}

#[pyfunction]
#[pyo3(signature = (x, y, gamma = DEFAULT_GAMMA, normalize = true))]
fn detect(x: Vec<Vec<f64>>, y: Vec<f64>, gamma: f64, normalize: bool) -> PyResult<DeviationReport> {
    let mut data = dataset(&x, y)?;
    if normalize {
        data = detector::normalize_unit_variance(&data).map_err(py_err)?;
    }
    let mut report = detector::detect(&data, gamma).map_err(py_err)?;
    report.normalized = normalize;
    Ok(report.into())
}

#[pyfunction]
#[pyo3(signature = (x, y, metric = "euclidean"))]
fn js_detect(x: Vec<Vec<f64>>, y: Vec<f64>, metric: &str) -> PyResult<PatternFit> {
    let data = dataset(&x, y)?;
    Ok(baseline::js_detect_with(&data, parse::<Metric>(metric)?).map_err(py_err)?.into())
}

/// Limit of the deviation for `kind` in `constant`, `poly`, `exp`.
#[pyfunction]
#[pyo3(signature = (kind, c, r_b, sigma1 = 1.0))]
fn closed_form(kind: &str, c: f64, r_b: f64, sigma1: f64) -> PyResult<f64> {
    Ok(dev::closed_form(parse::<ClosedFormKind>(kind)?, c, r_b, sigma1))
}

/// Finite-n asymptotic deviation of a noise spectrum.
#[pyfunction]
fn asymptotic_deviation(spectrum: Vec<f64>, c: f64, r_b: f64) -> PyResult<f64> {
    let mom = AsymptoticMoments::from_spectrum(&spectrum, r_b).map_err(py_err)?;
    dev::asymptotic_deviation(c, r_b, &mom).map_err(py_err)
}

/// `r_b²` at which the confounder becomes invisible, or `None`.
#[pyfunction]
fn nonidentifiable_radius_sq(spectrum: Vec<f64>) -> PyResult<Option<f64>> {
    dev::nonidentifiable_radius_sq_from_spectrum(&spectrum).map_err(py_err)
}

/// Deviation values of `runs` simulated models per dimension in `n`.
/// `samples = 0` uses population covariances.
#[pyfunction]
#[pyo3(signature = (n, samples = 500, runs = 200, c = "uniform:1,2", spectrum = "random:0,1", seed = 0))]
fn simulate(n: Vec<usize>, samples: usize, runs: usize, c: &str, spectrum: &str, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let config = ExperimentConfig {
        n,
        samples,
        runs,
        c: parse::<CSpec>(c)?,
        spectrum: parse::<SpectrumSpec>(spectrum)?,
        seed,
        ..Default::default()
    };
    let dists = harness::run_distribution(&config).map_err(py_err)?;
    Ok(dists.iter().map(|d| d.values()).collect())
}

/// Runs a benchmark from a JSON experiment config; returns the table as JSON.
#[pyfunction]
fn benchmark(config_json: &str) -> PyResult<String> {
    let config: ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let table = harness::run_benchmark(&config).map_err(py_err)?;
    serde_json::to_string(&table.rows).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Detector over a CSV file, one report per repeat.
#[pyfunction]
#[pyo3(signature = (path, target, drop = Vec::new(), subsample = None, repeats = 1, gamma = DEFAULT_GAMMA, seed = 0, normalize = true, method = "ours"))]
#[allow(clippy::too_many_arguments)]
fn analyze_csv(
    path: PathBuf,
    target: String,
    drop: Vec<String>,
    subsample: Option<usize>,
    repeats: usize,
    gamma: f64,
    seed: u64,
    normalize: bool,
    method: &str,
) -> PyResult<(Vec<DeviationReport>, Vec<PatternFit>)> {
    let mut options = AnalyzeOptions::new(target);
    options.drop = drop;
    options.subsample = subsample;
    options.repeats = repeats;
    options.gamma = gamma;
    options.seed = seed;
    options.normalize = normalize;
    options.method = parse::<Method>(method)?;
    let result = harness::analyze_csv(&path, &options).map_err(py_err)?;
    Ok((
        result.reports.into_iter().map(Into::into).collect(),
        result.js.into_iter().map(Into::into).collect(),
    ))
}

/// Noise spectrum `σ_1..σ_n` for a spec string such as `poly` or `random:0.5,1`.
#[pyfunction]
fn spectrum(spec: &str, n: usize) -> PyResult<Vec<f64>> {
    model_gen::spectrum(&parse::<SpectrumSpec>(spec)?, n).map_err(py_err)
}

#[pymodule(name = "spectral_confound")]
fn spectral_confound_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<DeviationReport>()?;
    m.add_class::<PatternFit>()?;
    m.add_function(wrap_pyfunction!(deviation, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(js_detect, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(nonidentifiable_radius_sq, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_csv, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add("DEFAULT_GAMMA", DEFAULT_GAMMA)?;
    Ok(())
}
