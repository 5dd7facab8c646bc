use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{AnnulusGrid, Boundary, BoundaryTrace};

/// Discretized Robin coefficient on the inner circle, confined to the box
/// `0 < gamma_lo <= gamma[j] <= gamma_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinCoefficient {
    values: Vec<f64>,
    gamma_lo: f64,
    gamma_hi: f64,
}

fn check_bounds(lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(Error::InvalidBounds { lo, hi });
    }
    Ok(())
}

impl RobinCoefficient {
    /// Checks every value against the box; fails on the first violation.
    pub fn new(values: Vec<f64>, gamma_lo: f64, gamma_hi: f64) -> Result<Self> {
        check_bounds(gamma_lo, gamma_hi)?;
        for (index, &value) in values.iter().enumerate() {
            if !(gamma_lo..=gamma_hi).contains(&value) {
                return Err(Error::Infeasible {
                    index,
                    value,
                    lo: gamma_lo,
                    hi: gamma_hi,
                });
            }
        }
        Ok(Self {
            values,
            gamma_lo,
            gamma_hi,
        })
    }

    pub fn constant(n_theta: usize, value: f64, gamma_lo: f64, gamma_hi: f64) -> Result<Self> {
        Self::new(vec![value; n_theta], gamma_lo, gamma_hi)
    }

    /// Clips each value into the box (the Euclidean projection onto K).
    pub fn projected(values: Vec<f64>, gamma_lo: f64, gamma_hi: f64) -> Result<Self> {
        check_bounds(gamma_lo, gamma_hi)?;
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN coefficient value".into()));
        }
        Ok(Self {
            values: values
                .into_iter()
                .map(|v| v.clamp(gamma_lo, gamma_hi))
                .collect(),
            gamma_lo,
            gamma_hi,
        })
    }

    /// Same box, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.gamma_lo, self.gamma_hi)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn gamma_lo(&self) -> f64 {
        self.gamma_lo
    }

    pub fn gamma_hi(&self) -> f64 {
        self.gamma_hi
    }

    pub fn is_radial(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    /// `self - other` as a trace on the inner circle.
    pub fn difference(&self, other: &RobinCoefficient) -> BoundaryTrace {
        BoundaryTrace::new(
            Boundary::Inner,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn as_trace(&self) -> BoundaryTrace {
        BoundaryTrace::new(Boundary::Inner, self.values.clone())
    }

    pub(crate) fn check(&self, grid: &AnnulusGrid) -> Result<()> {
        if self.values.len() != grid.n_theta() {
            return Err(Error::DimensionMismatch {
                what: "Robin coefficient",
                expected: grid.n_theta(),
                found: self.values.len(),
            });
        }
        Ok(())
    }
}
