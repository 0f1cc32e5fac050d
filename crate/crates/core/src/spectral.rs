//! Eigendecomposition of symmetric matrices and the spectral measures built
//! on top of it.
//!
//! A spectral measure is kept in vectorized form: a support vector holding
//! the eigenvalues (descending) and a weight vector of the same length.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance used when validating positive semi-definiteness.
/// Eigenvalues in `[-PSD_TOLERANCE * λ_1, 0)` are clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-8;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// A real symmetric matrix.
///
/// The constructor symmetrizes its input as `(A + Aᵀ) / 2`, so the stored
/// entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "row of length {} in a {n}-row matrix",
                bad.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self(DMatrix::identity(n, n) * s)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.0[(i, j)] == 0.0))
    }

    /// `self + v vᵀ`.
    pub fn rank_one_update(&self, v: &DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), v.len())?;
        Ok(Self(&self.0 + v * v.transpose()))
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.0 * v)
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
///
/// Each eigenvector column has its first non-negligible component positive.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn smallest(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `λ_max / λ_min`; infinite when the smallest eigenvalue is not positive.
    pub fn condition_number(&self) -> f64 {
        let lo = self.smallest();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            self.largest() / lo
        }
    }

    /// `U diag(λ) Uᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let u = &self.eigenvectors;
        let scaled = u * DMatrix::from_diagonal(&self.eigenvalues);
        scaled * u.transpose()
    }

    /// Applies `f` to every eigenvalue and rebuilds `U diag(f(λ)) Uᵀ v`.
    pub fn apply_function(&self, v: &DVector<f64>, f: impl Fn(f64) -> f64) -> Result<DVector<f64>> {
        check_dim(self.dim(), v.len())?;
        let mut coords = self.eigenvectors.tr_mul(v);
        for (c, &l) in coords.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= f(l);
        }
        Ok(&self.eigenvectors * coords)
    }
}

/// Eigendecomposition of a symmetric matrix.
pub fn eigendecompose(m: &SymMatrix) -> Result<EigenDecomposition> {
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::DecompositionFailure)?;
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigendecomposition of a matrix that must be positive semi-definite.
///
/// Eigenvalues within `PSD_TOLERANCE · λ_1` below zero are clamped to zero;
/// anything more negative is an error.
pub fn eigendecompose_psd(m: &SymMatrix) -> Result<EigenDecomposition> {
    let mut eig = eigendecompose(m)?;
    let tolerance = PSD_TOLERANCE * eig.largest().abs();
    for l in eig.eigenvalues.iter_mut() {
        if *l < 0.0 {
            if *l < -tolerance {
                return Err(Error::NotPositiveSemiDefinite {
                    eigenvalue: *l,
                    tolerance,
                });
            }
            *l = 0.0;
        }
    }
    Ok(eig)
}

/// A discrete measure on the real line in vectorized form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    support: DVector<f64>,
    weights: DVector<f64>,
}

impl SpectralMeasure {
    pub fn new(support: DVector<f64>, weights: DVector<f64>) -> Result<Self> {
        check_dim(support.len(), weights.len())?;
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidSpectrum(
                "measure weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self { support, weights })
    }

    pub fn support(&self) -> &DVector<f64> {
        &self.support
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.sum()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Measure placing `⟨φ, u_i⟩²` at each eigenvalue `λ_i`.
pub fn induced_measure(phi: &DVector<f64>, eig: &EigenDecomposition) -> Result<SpectralMeasure> {
    check_dim(eig.dim(), phi.len())?;
    let coords = eig.eigenvectors.tr_mul(phi);
    let weights = coords.component_mul(&coords);
    Ok(SpectralMeasure {
        support: eig.eigenvalues.clone(),
        weights,
    })
}

/// Uniform measure with weight `1/n` at each eigenvalue.
pub fn tracial_measure(eig: &EigenDecomposition) -> SpectralMeasure {
    let n = eig.dim();
    SpectralMeasure {
        support: eig.eigenvalues.clone(),
        weights: DVector::from_element(n, 1.0 / n as f64),
    }
}

/// `λᵀω`.
pub fn first_moment(mu: &SpectralMeasure) -> f64 {
    mu.support.dot(&mu.weights)
}

/// `φᵀ M φ`, the first moment of the `φ`-induced measure computed without
/// an eigendecomposition.
pub fn quadratic_moment(phi: &DVector<f64>, m: &SymMatrix) -> Result<f64> {
    check_dim(m.dim(), phi.len())?;
    Ok(phi.dot(&(m.as_matrix() * phi)))
}

/// `tr(M) / n`.
pub fn renormalized_trace(m: &SymMatrix) -> f64 {
    m.trace() / m.dim() as f64
}

/// Solves `M x = rhs` for a positive definite `M`.
///
/// Diagonal matrices are solved elementwise; everything else goes through a
/// Cholesky factorization.
pub fn solve_positive_definite(m: &SymMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(m.dim(), rhs.len())?;
    if m.is_diagonal() {
        let d = m.as_matrix().diagonal();
        if d.iter().any(|v| *v <= 0.0) {
            return Err(Error::SingularMatrix);
        }
        return Ok(rhs.component_div(&d));
    }
    let chol = nalgebra::Cholesky::new(m.as_matrix().clone()).ok_or(Error::SingularMatrix)?;
    Ok(chol.solve(rhs))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionError { expected, found })
    }
}
