//! Time-parallel rational approximations of `exp(tau*A)` for operators whose
//! spectrum lies on (or near) the imaginary axis.
//!
//! The approximation is assembled in three steps:
//!
//! 1. [`gauss_kernel`] writes `e^{ix}` as a finite sum of shifted Gaussians
//!    together with an a-priori error bound,
//! 2. [`rational_fit`] replaces the Gaussian by a rational function in
//!    pole-symmetric form (a built-in 25-term table is included),
//! 3. [`rexi_terms`] convolves the two into partial-fraction term tables whose
//!    terms are mutually independent shifted linear solves.
//!
//! [`matrix_eval`] evaluates the resulting sums for generic operators behind a
//! shifted-solve trait, and [`lrsw_solver`] instantiates the whole pipeline
//! for the linear rotating shallow water equations on a doubly periodic
//! square, where each shifted solve reduces to a scalar Helmholtz problem per
//! Fourier mode.
//!
//! All evaluators share one property that makes them trivially parallel: the
//! term solves do not depend on each other, so a time step costs one
//! communication round regardless of how many terms are in flight.

pub mod gauss_kernel;
pub mod lrsw_solver;
pub mod matrix_eval;
pub mod rational_fit;
pub mod rexi_terms;

use std::fmt;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violated a documented precondition.
    InvalidParameter(String),
    /// An input vector or matrix had the wrong size.
    DimensionMismatch { expected: usize, got: usize },
    /// A coefficient file failed to parse; `line` is 1-based.
    CoeffParse { line: usize, message: String },
    /// A shifted linear solve could not be completed.
    SolveFailed(String),
    /// The two independent reference-exponential routes disagreed.
    ReferenceDisagreement { relative: f64 },
    /// A matrix required to be invertible was numerically singular.
    Singular(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::CoeffParse { line, message } => {
                write!(f, "coefficient file, line {line}: {message}")
            }
            Error::SolveFailed(msg) => write!(f, "shifted solve failed: {msg}"),
            Error::ReferenceDisagreement { relative } => write!(
                f,
                "reference exponential routes disagree (relative difference {relative:.3e})"
            ),
            Error::Singular(msg) => write!(f, "singular matrix: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
