//! Error types shared across the solver modules.

use thiserror::Error;

/// A model or discretization parameter outside its admissible domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("fractional order sigma = {0} is outside (1, 2]")]
    SigmaOutOfRange(f64),
    #[error("{name} = {value} must be positive")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} = {value} is not finite")]
    NotFinite { name: &'static str, value: f64 },
    #[error("at least {min} Grünwald weights are required, got {got}")]
    TooFewWeights { min: usize, got: usize },
    #[error("weights were generated for sigma = {weights}, problem has sigma = {problem}")]
    WeightOrderMismatch { weights: f64, problem: f64 },
    #[error("grid needs at least 2 subintervals, got {0}")]
    TooFewIntervals(usize),
    #[error("grid length {grid} does not match problem length {problem}")]
    GridMismatch { grid: f64, problem: f64 },
    #[error("initial profile psi({x}) = {value} is outside [0, kappa = {kappa})")]
    InitialProfile { x: f64, value: f64, kappa: f64 },
    #[error("{name}({x}, {t}) = {value} must be positive")]
    Diffusivity {
        name: &'static str,
        x: f64,
        t: f64,
        value: f64,
    },
    #[error("quench threshold delta = {delta} must lie in (0, kappa = {kappa})")]
    QuenchDelta { delta: f64, kappa: f64 },
}

/// The solution reached the quenching ceiling κ where the source is singular.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("v[{index}] = {value} reached the quenching ceiling kappa = {kappa}")]
pub struct QuenchOverflow {
    pub index: usize,
    pub value: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular: zero pivot in column {column}")]
    Singular { column: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}
