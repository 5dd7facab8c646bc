use alloc::string::String;
use alloc::vec::Vec;

/// Errors produced by the solvers and the inverse/stability machinery.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid coefficient bounds: need 0 < lo <= hi, got lo = {lo}, hi = {hi}")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("coefficient value {value} at node {index} lies outside [{lo}, {hi}]")]
    Infeasible {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("zero pivot in banded LU at row {row}")]
    SingularMatrix { row: usize },

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}{}", step_suffix(.step))]
    SolveFailed {
        residual: f64,
        tolerance: f64,
        step: Option<usize>,
    },

    #[error(
        "solution vanishes on the inner boundary ({value}); the coefficient is not identifiable"
    )]
    NotIdentifiable { value: f64 },

    #[error("map is rank deficient: smallest singular value {sigma_min:e} below threshold {threshold:e}")]
    RankDeficient { sigma_min: f64, threshold: f64 },

    #[error("coefficients coincide; the Lipschitz ratio is undefined")]
    CoincidentCoefficients,

    #[error("data difference vanishes for distinct coefficients (identifiability violation)")]
    IdentifiabilityViolation { gamma1: Vec<f64>, gamma2: Vec<f64> },

    #[error(
        "probe radius {radius} leaves the feasible box (pointwise reach {reach}, margin {margin})"
    )]
    InfeasibleRadius {
        radius: f64,
        reach: f64,
        margin: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn step_suffix(step: &Option<usize>) -> String {
    match step {
        Some(s) => alloc::format!(" at time step {s}"),
        None => String::new(),
    }
}

pub type Result<T> = core::result::Result<T, Error>;
