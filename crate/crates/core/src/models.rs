//! Rotation-invariant generators for the confounded linear model
//!
//! ```text
//! X = b Z + E,    Y = aᵀX + c Z + F,    Var(Z) = 1
//! ```
//!
//! Every generator takes an explicit random stream. Experiments derive one
//! stream per run with [`run_rng`] so results do not depend on scheduling.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::deviation::{deviation, sherman_morrison_solve, DeviationValue};
use crate::error::{Error, Result};
use crate::spectral::{eigendecompose, eigendecompose_psd, SymMatrix};

/// Degrees of freedom of the Student-t noise family.
pub const STUDENT_DF: f64 = 10.0;

/// Seeded stream for one run of an experiment.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A vector drawn uniformly from the sphere of radius `r` in `ℝⁿ`.
pub fn uniform_sphere<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> DVector<f64> {
    assert!(n >= 1, "sphere dimension must be at least 1");
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-300 {
            return v * (r / norm);
        }
    }
}

/// How coefficient vectors are drawn before being rescaled to their radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientFamily {
    /// Standard normal entries; after rescaling this is uniform on the sphere.
    #[default]
    Normal,
    /// Entries uniform on `[-0.5, 0.5]`.
    Uniform,
}

impl CoefficientFamily {
    pub fn draw<R: Rng + ?Sized>(self, n: usize, r: f64, rng: &mut R) -> DVector<f64> {
        match self {
            Self::Normal => uniform_sphere(n, r, rng),
            Self::Uniform => loop {
                let v = DVector::from_fn(n, |_, _| rng.random_range(-0.5..=0.5));
                let norm = v.norm();
                if norm > 1e-300 {
                    break v * (r / norm);
                }
            },
        }
    }
}

/// Random covariance with eigenvectors of a symmetrized uniform
/// matrix, eigenvalues uniform on `(diag_lo, diag_hi)`.
pub fn random_covariance<R: Rng + ?Sized>(
    n: usize,
    diag_lo: f64,
    diag_hi: f64,
    rng: &mut R,
) -> Result<SymMatrix> {
    if !(diag_lo >= 0.0 && diag_lo < diag_hi) {
        return Err(Error::InvalidConfig(format!(
            "random covariance needs 0 <= lo < hi, got ({diag_lo}, {diag_hi})"
        )));
    }
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..=0.5));
    let basis = eigendecompose(&SymMatrix::new(a)?)?;
    let gamma: Vec<f64> = (0..n).map(|_| draw_open(diag_lo, diag_hi, rng)).collect();
    let v = basis.eigenvectors();
    let scaled = v * DMatrix::from_diagonal(&DVector::from_vec(gamma));
    SymMatrix::new(scaled * v.transpose())
}

fn draw_open<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    loop {
        let v = rng.random_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

/// Eigenvalue profile of the noise covariance `Σ_E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumKind {
    Constant,
    PolynomialDecay,
    ExponentialDecay { rate: f64 },
    /// Random orthogonal basis with eigenvalues uniform on `(lo, hi)`.
    Random { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    #[serde(flatten)]
    pub kind: SpectrumKind,
    #[serde(default = "one")]
    pub sigma1: f64,
}

fn one() -> f64 {
    1.0
}

impl SpectrumSpec {
    pub fn constant(sigma1: f64) -> Self {
        Self {
            kind: SpectrumKind::Constant,
            sigma1,
        }
    }

    pub fn polynomial(sigma1: f64) -> Self {
        Self {
            kind: SpectrumKind::PolynomialDecay,
            sigma1,
        }
    }

    pub fn exponential(sigma1: f64, rate: f64) -> Self {
        Self {
            kind: SpectrumKind::ExponentialDecay { rate },
            sigma1,
        }
    }

    pub fn random(lo: f64, hi: f64) -> Self {
        Self {
            kind: SpectrumKind::Random { lo, hi },
            sigma1: 1.0,
        }
    }
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self::constant(1.0)
    }
}

impl FromStr for SpectrumSpec {
    type Err = Error;

    /// `constant`, `poly`, `exp:<rate>` or `random:<lo>,<hi>`; `sigma1` is 1.
    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = split_args(s);
        match (head, args) {
            ("constant", None) => Ok(Self::constant(1.0)),
            ("poly" | "polynomial", None) => Ok(Self::polynomial(1.0)),
            ("exp" | "exponential", None) => Ok(Self::exponential(1.0, (-1.0f64).exp())),
            ("exp" | "exponential", Some(rate)) => Ok(Self::exponential(1.0, parse_num(rate)?)),
            ("random", Some(args)) => {
                let (lo, hi) = parse_pair(args)?;
                Ok(Self::random(lo, hi))
            }
            _ => Err(Error::InvalidConfig(format!("unknown spectrum `{s}`"))),
        }
    }
}

impl fmt::Display for SpectrumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SpectrumKind::Constant => write!(f, "constant"),
            SpectrumKind::PolynomialDecay => write!(f, "poly"),
            SpectrumKind::ExponentialDecay { rate } => write!(f, "exp:{rate}"),
            SpectrumKind::Random { lo, hi } => write!(f, "random:{lo},{hi}"),
        }
    }
}

/// Deterministic spectra: `σ₁`, `σ₁/i` or `σ₁ ρ^{i-1}`, for `i = 1..=n`.
pub fn spectrum(spec: &SpectrumSpec, n: usize) -> Result<Vec<f64>> {
    if !(spec.sigma1 > 0.0) {
        return Err(Error::InvalidSpectrum("sigma1 must be positive".into()));
    }
    let s1 = spec.sigma1;
    match spec.kind {
        SpectrumKind::Constant => Ok(vec![s1; n]),
        SpectrumKind::PolynomialDecay => Ok((1..=n).map(|i| s1 / i as f64).collect()),
        SpectrumKind::ExponentialDecay { rate } => {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(Error::InvalidSpectrum(format!("decay rate {rate} not in (0, 1]")));
            }
            Ok((0..n).map(|i| s1 * rate.powi(i as i32)).collect())
        }
        SpectrumKind::Random { .. } => Err(Error::InvalidSpectrum(
            "random spectra are drawn with random_covariance".into(),
        )),
    }
}

/// `ln σ_i` of a deterministic spectrum; unlike [`spectrum`] this does not
/// underflow for long exponential tails.
pub fn log_spectrum(spec: &SpectrumSpec, n: usize) -> Result<Vec<f64>> {
    if !(spec.sigma1 > 0.0) {
        return Err(Error::InvalidSpectrum("sigma1 must be positive".into()));
    }
    let l1 = spec.sigma1.ln();
    match spec.kind {
        SpectrumKind::ExponentialDecay { rate } => {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(Error::InvalidSpectrum(format!("decay rate {rate} not in (0, 1]")));
            }
            Ok((0..n).map(|i| l1 + i as f64 * rate.ln()).collect())
        }
        _ => Ok(spectrum(spec, n)?.into_iter().map(f64::ln).collect()),
    }
}

/// Noise family selector used in configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Student,
    LogNormal,
    Mixture,
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "student" | "t" => Ok(Self::Student),
            "lognormal" => Ok(Self::LogNormal),
            "mixture" => Ok(Self::Mixture),
            other => Err(Error::InvalidConfig(format!("unknown noise family `{other}`"))),
        }
    }
}

/// A concrete noise family. Every family draws zero-mean, unit-variance
/// scalars; correlated noise is `Σ_E^{1/2}` times a vector of such draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    StudentT { df: f64 },
    LogNormal,
    /// Equal-weight mixture of `N(μ₁, 1)` and `N(μ₂, 1)`.
    GaussianMixture2 { means: [f64; 2] },
}

impl NoiseFamily {
    /// Instantiates a family; mixture means are drawn uniformly on `[-0.5, 0.5]`.
    pub fn from_kind<R: Rng + ?Sized>(kind: NoiseKind, rng: &mut R) -> Self {
        match kind {
            NoiseKind::Gaussian => Self::Gaussian,
            NoiseKind::Student => Self::StudentT { df: STUDENT_DF },
            NoiseKind::LogNormal => Self::LogNormal,
            NoiseKind::Mixture => Self::GaussianMixture2 {
                means: [rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5)],
            },
        }
    }

    pub fn standardized_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian => rng.sample(StandardNormal),
            Self::StudentT { df } => {
                let t: f64 = StudentT::new(df).expect("df > 0").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
            Self::LogNormal => {
                let g: f64 = rng.sample(StandardNormal);
                let e = std::f64::consts::E;
                (g.exp() - e.sqrt()) / ((e - 1.0) * e).sqrt()
            }
            Self::GaussianMixture2 { means } => {
                let g: f64 = rng.sample(StandardNormal);
                let mu = if rng.random_bool(0.5) { means[0] } else { means[1] };
                let centre = 0.5 * (means[0] + means[1]);
                let half_gap = 0.5 * (means[0] - means[1]);
                (g + mu - centre) / (1.0 + half_gap * half_gap).sqrt()
            }
        }
    }
}

/// How the confounder weight `c` is chosen per model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CSpec {
    /// `c = 0`: purely causal.
    #[default]
    Zero,
    /// `c ~ N(0, 1)`.
    Normal,
    /// `c ~ U[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    Fixed { value: f64 },
}

impl CSpec {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Normal => rng.sample(StandardNormal),
            Self::Uniform { lo, hi } => rng.random_range(lo..=hi),
            Self::Fixed { value } => value,
        }
    }

    pub fn is_confounded(&self) -> bool {
        match *self {
            Self::Zero => false,
            Self::Fixed { value } => value != 0.0,
            _ => true,
        }
    }
}

impl FromStr for CSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = split_args(s);
        match (head, args) {
            ("zero", None) => Ok(Self::Zero),
            ("normal", None) => Ok(Self::Normal),
            ("uniform", Some(args)) => {
                let (lo, hi) = parse_pair(args)?;
                if lo > hi {
                    return Err(Error::InvalidConfig(format!("empty c range `{s}`")));
                }
                Ok(Self::Uniform { lo, hi })
            }
            ("fixed", Some(v)) => Ok(Self::Fixed { value: parse_num(v)? }),
            _ => Err(Error::InvalidConfig(format!("unknown c spec `{s}`"))),
        }
    }
}

impl fmt::Display for CSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Normal => write!(f, "normal"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Fixed { value } => write!(f, "fixed:{value}"),
        }
    }
}

impl FromStr for CoefficientFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidConfig(format!("unknown coefficient family `{other}`"))),
        }
    }
}

/// Ground-truth parameters of one confounded linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct ConfoundedModel {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub c: f64,
    pub sigma_e: SymMatrix,
    pub noise: NoiseFamily,
    pub f_std: f64,
}

impl ConfoundedModel {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn r_a(&self) -> f64 {
        self.a.norm()
    }

    pub fn r_b(&self) -> f64 {
        self.b.norm()
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
    sigma_e: Vec<Vec<f64>>,
    noise: NoiseFamily,
    f_std: f64,
}

impl From<ConfoundedModel> for ModelRecord {
    fn from(m: ConfoundedModel) -> Self {
        Self {
            n: m.n(),
            a: m.a.iter().copied().collect(),
            b: m.b.iter().copied().collect(),
            c: m.c,
            sigma_e: m.sigma_e.to_rows(),
            noise: m.noise,
            f_std: m.f_std,
        }
    }
}

impl TryFrom<ModelRecord> for ConfoundedModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        if r.a.len() != r.n || r.b.len() != r.n {
            return Err(Error::DimensionError {
                expected: r.n,
                found: r.a.len().max(r.b.len()),
            });
        }
        let sigma_e = SymMatrix::from_rows(&r.sigma_e)?;
        if sigma_e.dim() != r.n {
            return Err(Error::DimensionError {
                expected: r.n,
                found: sigma_e.dim(),
            });
        }
        Ok(Self {
            a: DVector::from_vec(r.a),
            b: DVector::from_vec(r.b),
            c: r.c,
            sigma_e,
            noise: r.noise,
            f_std: r.f_std,
        })
    }
}

/// Inputs of [`build_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub r_a: f64,
    pub r_b: f64,
    pub c: f64,
    pub coeffs: CoefficientFamily,
    pub spectrum: SpectrumSpec,
    pub noise: NoiseKind,
    pub f_std: f64,
}

impl ModelParams {
    pub fn new(n: usize, c: f64) -> Self {
        Self {
            n,
            r_a: 1.0,
            r_b: 1.0,
            c,
            coeffs: CoefficientFamily::Normal,
            spectrum: SpectrumSpec::default(),
            noise: NoiseKind::Gaussian,
            f_std: 1.0,
        }
    }
}

/// Draws `a` and `b` on their spheres and builds `Σ_E` from the spectrum
/// spec. Deterministic spectra give a diagonal `Σ_E`; since `a` and `b` are
/// rotation invariant this loses no generality.
pub fn build_model<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Result<ConfoundedModel> {
    let ModelParams { n, r_a, r_b, c, .. } = *params;
    if n == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    if !(r_a > 0.0 && r_b > 0.0) {
        return Err(Error::InvalidConfig("radii r_a and r_b must be positive".into()));
    }
    if !c.is_finite() {
        return Err(Error::InvalidConfig("c must be finite".into()));
    }
    let a = params.coeffs.draw(n, r_a, rng);
    let b = params.coeffs.draw(n, r_b, rng);
    let sigma_e = match params.spectrum.kind {
        SpectrumKind::Random { lo, hi } => random_covariance(n, lo, hi, rng)?,
        _ => SymMatrix::from_diagonal(&spectrum(&params.spectrum, n)?)?,
    };
    let noise = NoiseFamily::from_kind(params.noise, rng);
    Ok(ConfoundedModel {
        a,
        b,
        c,
        sigma_e,
        noise,
        f_std: params.f_std,
    })
}

/// Population covariances and the population regression vector.
#[derive(Debug, Clone)]
pub struct PopulationQuantities {
    /// `Σ_E + bbᵀ`
    pub sigma_x: SymMatrix,
    /// `Σ_X a + c b`
    pub sigma_xy: DVector<f64>,
    /// `a + c Σ_X⁻¹ b`
    pub regression: DVector<f64>,
}

pub fn population_quantities(model: &ConfoundedModel) -> Result<PopulationQuantities> {
    let sigma_x = model.sigma_e.rank_one_update(&model.b)?;
    let sigma_xy = sigma_x.mul_vec(&model.a)? + &model.b * model.c;
    let confounding = sherman_morrison_solve(&model.sigma_e, &model.b)?;
    let regression = &model.a + confounding * model.c;
    Ok(PopulationQuantities {
        sigma_x,
        sigma_xy,
        regression,
    })
}

/// `D(ã, Σ_X)` from the true model parameters.
pub fn population_deviation(model: &ConfoundedModel) -> Result<DeviationValue> {
    let pop = population_quantities(model)?;
    deviation(&pop.regression, &pop.sigma_x)
}

/// `L` observations of `(X, Y)`. `x` is `L × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub normalized: bool,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionError {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        let feature_names = (1..=x.ncols()).map(|i| format!("x{i}")).collect();
        Ok(Self {
            x,
            y,
            normalized: false,
            feature_names,
            target_name: "y".into(),
        })
    }

    pub fn with_names(mut self, features: Vec<String>, target: String) -> Result<Self> {
        if features.len() != self.x.ncols() {
            return Err(Error::DimensionError {
                expected: self.x.ncols(),
                found: features.len(),
            });
        }
        self.feature_names = features;
        self.target_name = target;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    /// Rows at the given indices, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            normalized: self.normalized,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Writes a header row (feature names, then the target) and one row per
    /// observation. Values use the shortest round-trip decimal form.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut record: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.y[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `L` i.i.d. observations.
pub fn sample<R: Rng + ?Sized>(model: &ConfoundedModel, samples: usize, rng: &mut R) -> Result<Dataset> {
    Ok(sample_with_confounder(model, samples, rng)?.0)
}

/// Like [`sample`], also returning the latent confounder draws.
pub fn sample_with_confounder<R: Rng + ?Sized>(
    model: &ConfoundedModel,
    samples: usize,
    rng: &mut R,
) -> Result<(Dataset, DVector<f64>)> {
    if samples < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let n = model.n();
    let root = covariance_root(&model.sigma_e)?;
    let mut x = DMatrix::zeros(samples, n);
    let mut y = DVector::zeros(samples);
    let mut z_all = DVector::zeros(samples);
    let mut raw = DVector::zeros(n);
    for row in 0..samples {
        let z: f64 = rng.sample(StandardNormal);
        for v in raw.iter_mut() {
            *v = model.noise.standardized_draw(rng);
        }
        let e = &root * &raw;
        let xi = &model.b * z + e;
        let f = model.f_std * model.noise.standardized_draw(rng);
        y[row] = model.a.dot(&xi) + model.c * z + f;
        x.set_row(row, &xi.transpose());
        z_all[row] = z;
    }
    Ok((Dataset::new(x, y)?, z_all))
}

/// Symmetric square root `Σ^{1/2}` of a PSD matrix.
fn covariance_root(sigma: &SymMatrix) -> Result<DMatrix<f64>> {
    if sigma.is_diagonal() {
        let d = sigma.as_matrix().diagonal();
        if d.iter().any(|v| *v < 0.0) {
            return Err(Error::NotPositiveSemiDefinite {
                eigenvalue: d.min(),
                tolerance: 0.0,
            });
        }
        return Ok(DMatrix::from_diagonal(&d.map(f64::sqrt)));
    }
    let eig = eigendecompose_psd(sigma)?;
    let u = eig.eigenvectors();
    let roots = eig.eigenvalues().map(f64::sqrt);
    Ok(u * DMatrix::from_diagonal(&roots) * u.transpose())
}

fn split_args(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (s.trim(), None),
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{s}` is not a number")))
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::InvalidConfig(format!("expected `lo,hi`, got `{s}`")))?;
    Ok((parse_num(a)?, parse_num(b)?))
}
