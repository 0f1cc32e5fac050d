//! Hidden-confounder detection for high-dimensional linear models.
//!
//! Given observations of causes `X` (dimension `n`) and a target `Y`, the
//! least-squares regression vector `ã = Σ_X⁻¹ Σ_XY` induces a spectral
//! measure on the eigenvalues of `Σ_X`. Without confounding its first moment
//! matches the first moment of the uniform (tracial) measure scaled by
//! `‖ã‖²`; a scalar confounder breaks the match. The gap
//!
//! ```text
//! D(ã, Σ_X) = | ãᵀ Σ_X ã − ‖ã‖² · tr(Σ_X) / n |
//! ```
//!
//! is thresholded to decide whether a confounder is present.
//!
//! Modules:
//! - [`spectral`]: eigendecomposition, induced and tracial spectral measures, first moments.
//! - [`deviation`]: the deviation statistic, its asymptotic value and identifiability conditions.
//! - [`models`]: rotation-invariant generators for the confounded linear model.
//! - [`detector`]: the plug-in estimator and threshold decision.
//! - [`baseline`]: spectral pattern matching used as a comparison method.
//! - [`harness`]: experiment orchestration, CSV ingestion and output files.

// `!(x > 0.0)` is used deliberately so NaN falls into the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod detector;
pub mod deviation;
pub mod error;
pub mod harness;
pub mod models;
pub mod spectral;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
