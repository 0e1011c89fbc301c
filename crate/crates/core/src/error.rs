//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel smoothness {have} does not support derivative order {need} in dimension {dim}")]
    InsufficientSmoothness { have: f64, need: f64, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("interpolation matrix is numerically singular (sigma_min/sigma_max = {ratio:.3e})")]
    SingularInterpolation { ratio: f64 },

    #[error("matrix is rank deficient: numerical rank {rank} < {cols} columns (tolerance {tol:.3e})")]
    RankDeficient { rank: usize, cols: usize, tol: f64 },

    #[error("field does not provide derivatives of order {requested}")]
    UnsupportedDerivative { requested: usize },

    #[error("functional not covered by the problem's data definition: {0}")]
    UnsupportedFunctional(String),

    #[error("quadrature region does not match the requested integral: {0}")]
    RegionMismatch(String),

    #[error("symmetric collocation requires a positive definite kernel; {0} is not")]
    NotPositiveDefinite(String),

    #[error("Gram matrix numerically singular even after regularization (condition ~ {condition:.3e})")]
    GramSingular { condition: f64 },

    #[error("greedy stabilizer exhausted budget of {budget} functionals; best constant {best_constant:.4}")]
    BudgetExhausted {
        budget: usize,
        best_constant: f64,
        /// Best restriction found, boxed with its estimate so callers can inspect it.
        best: Box<crate::discretization::StabilizeOutcome>,
    },

    #[error("rate estimation requires positive inputs, got ({h}, {e})")]
    NonPositiveInput { h: f64, e: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
