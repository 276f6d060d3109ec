//! # hklab
//!
//! A numerical laboratory for Hellinger–Kantorovich type transport distances,
//! Rényi-type entropic divergences and the reverse functional inequalities of
//! Markov kernels, all on finite metric measure spaces.
//!
//! ## Layout
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`space`] | finite metric spaces, measures, discrete gradients, Lipschitz dictionaries |
//! | [`markov`] | row-stochastic kernels: heat, Ornstein–Uhlenbeck, empirical |
//! | [`transport`] | `W_{a,b}` family: Hellinger, exact `W₂`, LET/HK solver |
//! | [`divergence`] | `T_{a,b}` family: Rényi closed form, certified bounds, certificates |
//! | [`funcineq`] | constant estimators (RPI, rLSI, gradient bound) and verification harnesses |
//! | [`dynamics`] | Langevin simulation, decay experiments, Gaussian quasi-invariance |
//!
//! ## Conventions
//!
//! The heat semigroup is generated by `Δ` (not `½Δ`): the heat kernel at time
//! `t` is Gaussian with variance `2t`, and the Langevin scheme uses increments
//! `√(2h)·ξ`. The constants `1/(2t)` (reverse Poincaré) and `e^{-2at}`
//! (gradient bound of the OU kernel) are stated in this convention.
//!
//! ```
//! use hklab::space::{DiscreteMeasure, FiniteMetricSpace};
//! use hklab::transport::hellinger_sq;
//!
//! let space = FiniteMetricSpace::two_point(1.0).unwrap();
//! let mu0 = DiscreteMeasure::probability(vec![1.0, 0.0]).unwrap();
//! let mu1 = DiscreteMeasure::probability(vec![0.5, 0.5]).unwrap();
//! let he = hellinger_sq(&mu0, &mu1).unwrap();
//! assert!((he - (2.0 - 2f64.sqrt())).abs() < 1e-12);
//! # let _ = space;
//! ```

use thiserror::Error;

pub mod divergence;
pub mod dynamics;
pub mod funcineq;
pub mod markov;
pub mod numeric;
pub mod space;
pub mod transport;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must live on the same space have different sizes.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A metric-space invariant failed.
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    /// A measure invariant failed.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// A kernel invariant failed.
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// A test-function invariant failed.
    #[error("invalid test function: {0}")]
    InvalidFunction(String),

    /// A scalar parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Some row of an empirical kernel received no samples.
    #[error("no samples for start point {row}")]
    EmptySamples { row: usize },

    /// An iterative solver stopped before certifying its answer.
    #[error("solver did not converge after {iterations} iterations (gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    /// A dual certificate cannot be evaluated.
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),

    /// The grid does not cover the mass required by a construction.
    #[error("grid too small: need radius {required}, have {actual}")]
    GridTooSmall { required: f64, actual: f64 },

    /// Every candidate ratio had a vanishing denominator (e.g. a
    /// deterministic kernel), so no estimate exists.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Text input (expression, CSV, JSON schema) could not be understood.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
