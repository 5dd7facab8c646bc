//! Polar tensor grid on the annulus `r1 <= |x| <= r2`, grid functions on it,
//! and the discrete L² norms every other module measures with.
//!
//! Nodes are stored radius-major: node `(i, j)` sits at radius `r_nodes[i]`
//! and angle `j * h_theta`, with flat index `i * n_theta + j`. The angular
//! direction is periodic by index wraparound; there is no duplicated seam node.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// The two circles bounding the annulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// `r = r1`, where the Robin coefficient lives (not measurable).
    Inner,
    /// `r = r2`, where data is measured.
    Outer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusGrid {
    r1: f64,
    r2: f64,
    n_r: usize,
    n_theta: usize,
    r_nodes: Vec<f64>,
    theta_nodes: Vec<f64>,
}

impl AnnulusGrid {
    pub fn new(r1: f64, r2: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        if !(r1.is_finite() && r2.is_finite()) || r1 <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "radii must be finite and positive, got r1 = {r1}, r2 = {r2}"
            )));
        }
        if r1 >= r2 {
            return Err(Error::InvalidGeometry(format!(
                "need r1 < r2, got r1 = {r1}, r2 = {r2}"
            )));
        }
        if n_r < 3 {
            return Err(Error::InvalidGeometry(format!(
                "n_r must be >= 3, got {n_r}"
            )));
        }
        if n_theta < 4 {
            return Err(Error::InvalidGeometry(format!(
                "n_theta must be >= 4, got {n_theta}"
            )));
        }
        let h_r = (r2 - r1) / (n_r - 1) as f64;
        let mut r_nodes: Vec<f64> = (0..n_r).map(|i| r1 + i as f64 * h_r).collect();
        r_nodes[n_r - 1] = r2;
        let h_theta = 2.0 * PI / n_theta as f64;
        let theta_nodes = (0..n_theta).map(|j| j as f64 * h_theta).collect();
        Ok(Self {
            r1,
            r2,
            n_r,
            n_theta,
            r_nodes,
            theta_nodes,
        })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta_nodes
    }

    pub fn h_r(&self) -> f64 {
        (self.r2 - self.r1) / (self.n_r - 1) as f64
    }

    pub fn h_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    /// Total number of nodes, `n_r * n_theta`.
    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// Angular neighbour indices `(j - 1, j + 1)` with wraparound.
    #[inline]
    pub fn theta_neighbours(&self, j: usize) -> (usize, usize) {
        let n = self.n_theta;
        ((j + n - 1) % n, (j + 1) % n)
    }

    pub fn boundary_radius(&self, boundary: Boundary) -> f64 {
        match boundary {
            Boundary::Inner => self.r1,
            Boundary::Outer => self.r2,
        }
    }

    /// Radial row index of a boundary circle.
    pub fn boundary_row(&self, boundary: Boundary) -> usize {
        match boundary {
            Boundary::Inner => 0,
            Boundary::Outer => self.n_r - 1,
        }
    }

    /// Rectangle-rule arc weight `r_Γ * h_theta` of one node on `boundary`.
    pub fn arc_weight(&self, boundary: Boundary) -> f64 {
        self.boundary_radius(boundary) * self.h_theta()
    }

    /// Area weight of node row `i`: trapezoid in `r`, rectangle in `theta`.
    pub fn area_weight(&self, i: usize) -> f64 {
        let w = self.r_nodes[i] * self.h_r() * self.h_theta();
        if i == 0 || i == self.n_r - 1 {
            0.5 * w
        } else {
            w
        }
    }
}

/// Values on one boundary circle, one per angular node.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub boundary: Boundary,
    pub values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn new(boundary: Boundary, values: Vec<f64>) -> Self {
        Self { boundary, values }
    }

    pub fn zeros(boundary: Boundary, n_theta: usize) -> Self {
        Self::constant(boundary, n_theta, 0.0)
    }

    pub fn constant(boundary: Boundary, n_theta: usize, value: f64) -> Self {
        Self {
            boundary,
            values: vec![value; n_theta],
        }
    }

    pub fn from_fn(grid: &AnnulusGrid, boundary: Boundary, f: impl Fn(f64) -> f64) -> Self {
        Self {
            boundary,
            values: grid.theta_nodes().iter().map(|&t| f(t)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            boundary: self.boundary,
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    /// Rotates by `k` angular nodes: `out[j] = values[j - k]`.
    pub fn rotated(&self, k: usize) -> Self {
        let n = self.values.len();
        Self {
            boundary: self.boundary,
            values: (0..n).map(|j| self.values[(j + n - k % n) % n]).collect(),
        }
    }

    pub(crate) fn check(&self, grid: &AnnulusGrid, what: &'static str) -> Result<()> {
        if self.values.len() != grid.n_theta() {
            return Err(Error::DimensionMismatch {
                what,
                expected: grid.n_theta(),
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

/// A grid function on the annulus (forward solutions, sensitivities, sources).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n_r: usize,
    n_theta: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &AnnulusGrid) -> Self {
        Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(r, theta)` at every node.
    pub fn from_fn(grid: &AnnulusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &r in grid.r_nodes() {
            for &t in grid.theta_nodes() {
                values.push(f(r, t));
            }
        }
        Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            values,
        }
    }

    pub fn from_values(grid: &AnnulusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "field",
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            values,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_theta + j]
    }

    /// Node values at radial row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_theta..(i + 1) * self.n_theta]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self - other`, nodewise.
    pub fn sub(&self, other: &Field) -> Field {
        Field {
            n_r: self.n_r,
            n_theta: self.n_theta,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub(crate) fn check(&self, grid: &AnnulusGrid, what: &'static str) -> Result<()> {
        if self.n_r != grid.n_r() || self.n_theta != grid.n_theta() {
            return Err(Error::DimensionMismatch {
                what,
                expected: grid.len(),
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Discrete `L²(Γ)` norm: `sqrt(Σ_j r_Γ h_θ v_j²)`.
pub fn boundary_norm(trace: &BoundaryTrace, grid: &AnnulusGrid) -> f64 {
    let w = grid.arc_weight(trace.boundary);
    libm::sqrt(w * trace.values.iter().map(|v| v * v).sum::<f64>())
}

/// Discrete `L²(Ω)` norm with area weights `r h_r h_θ` (halved on the two
/// boundary rows).
pub fn field_norm_l2(field: &Field, grid: &AnnulusGrid) -> f64 {
    let mut acc = 0.0;
    for i in 0..field.n_r() {
        let s: f64 = field.row(i).iter().map(|v| v * v).sum();
        acc += grid.area_weight(i) * s;
    }
    libm::sqrt(acc)
}
