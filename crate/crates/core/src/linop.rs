//! The linearized boundary operator `N(d) = ∂w(d)/∂n` on the outer circle,
//! where `w(d) = u'(γ*)d` is the sensitivity for an inner perturbation `d`.
//!
//! With the Robin condition `∂w/∂n + w = 0` on the outer circle the flux is
//! minus the trace, so `N(d) = -w(d)|_{r2}`, which is also what the discrete
//! Robin row enforces. The comparison outer conditions (Neumann, Dirichlet)
//! use the one-sided flux stencil instead.
//!
//! [`Forward`] is the problem context shared by the inverse and stability
//! modules: it wraps an elliptic or parabolic problem and knows the data
//! space (outer traces, stacked time-major in the parabolic case) and its
//! quadrature weights.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::coefficient::RobinCoefficient;
use crate::elliptic::{normal_derivative, trace, EllipticProblem, EllipticSolver, OuterBc};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::{AnnulusGrid, Boundary, BoundaryTrace, Field};
use crate::parabolic::{ParabolicProblem, ParabolicSolver, TimeField, TimeTrace};

/// Default rank-deficiency threshold relative to the largest singular value.
pub const RANK_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    Elliptic,
    Parabolic,
}

/// Forward problem whose coefficient-to-data map is linearized or inverted.
#[derive(Debug, Clone, PartialEq)]
pub enum Forward {
    Elliptic(EllipticProblem),
    Parabolic(ParabolicProblem),
}

/// Forward or sensitivity solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Elliptic(Field),
    Parabolic(TimeField),
}

/// Data on the outer circle: one trace, or one trace per time node.
#[derive(Debug, Clone, PartialEq)]
pub enum DataTrace {
    Elliptic(BoundaryTrace),
    Parabolic(TimeTrace),
}

impl DataTrace {
    pub fn stacked(&self) -> Vec<f64> {
        match self {
            DataTrace::Elliptic(t) => t.values.clone(),
            DataTrace::Parabolic(t) => t.stacked(),
        }
    }
}

impl Solution {
    pub fn outer_trace(&self) -> DataTrace {
        match self {
            Solution::Elliptic(f) => DataTrace::Elliptic(trace(f, Boundary::Outer)),
            Solution::Parabolic(f) => DataTrace::Parabolic(f.trace(Boundary::Outer)),
        }
    }

    pub fn inner_trace(&self) -> DataTrace {
        match self {
            Solution::Elliptic(f) => DataTrace::Elliptic(trace(f, Boundary::Inner)),
            Solution::Parabolic(f) => DataTrace::Parabolic(f.trace(Boundary::Inner)),
        }
    }
}

impl Forward {
    pub fn kind(&self) -> MapKind {
        match self {
            Forward::Elliptic(_) => MapKind::Elliptic,
            Forward::Parabolic(_) => MapKind::Parabolic,
        }
    }

    pub fn grid(&self) -> &AnnulusGrid {
        match self {
            Forward::Elliptic(p) => &p.grid,
            Forward::Parabolic(p) => &p.grid,
        }
    }

    pub fn gamma(&self) -> &RobinCoefficient {
        match self {
            Forward::Elliptic(p) => &p.gamma,
            Forward::Parabolic(p) => &p.gamma,
        }
    }

    pub fn outer_bc(&self) -> OuterBc {
        match self {
            Forward::Elliptic(p) => p.outer_bc,
            Forward::Parabolic(_) => OuterBc::Robin1,
        }
    }

    pub fn with_gamma(&self, gamma: RobinCoefficient) -> Result<Self> {
        Ok(match self {
            Forward::Elliptic(p) => Forward::Elliptic(p.with_gamma(gamma)?),
            Forward::Parabolic(p) => Forward::Parabolic(p.with_gamma(gamma)?),
        })
    }

    /// Length of the stacked data vector.
    pub fn data_len(&self) -> usize {
        let n = self.grid().n_theta();
        match self {
            Forward::Elliptic(_) => n,
            Forward::Parabolic(p) => n * (p.time.n_t() + 1),
        }
    }

    /// Quadrature weights of the data norm, one per stacked entry:
    /// `r2 hθ` on the outer circle, times the trapezoid weight in time.
    pub fn data_weights(&self) -> Vec<f64> {
        let grid = self.grid();
        let arc = grid.arc_weight(Boundary::Outer);
        match self {
            Forward::Elliptic(_) => vec![arc; grid.n_theta()],
            Forward::Parabolic(p) => p
                .time
                .trapezoid_weights()
                .into_iter()
                .flat_map(|w| core::iter::repeat_n(w * arc, grid.n_theta()))
                .collect(),
        }
    }

    /// `sqrt(Σ w v²)` over stacked data.
    pub fn data_norm(&self, v: &[f64]) -> f64 {
        let w = self.data_weights();
        libm::sqrt(v.iter().zip(&w).map(|(x, w)| w * x * x).sum())
    }

    pub fn solve(&self) -> Result<Solution> {
        Ok(match self {
            Forward::Elliptic(p) => Solution::Elliptic(EllipticSolver::new(p)?.solve()?),
            Forward::Parabolic(p) => Solution::Parabolic(ParabolicSolver::for_problem(p)?.solve(
                &p.g,
                &p.h,
                p.initial.as_ref(),
            )?),
        })
    }

    /// Stacked outer trace of the forward solution.
    pub fn outer_data(&self) -> Result<Vec<f64>> {
        Ok(self.solve()?.outer_trace().stacked())
    }

    /// Solves the forward problem once and keeps the factorization for
    /// sensitivity solves.
    pub fn linearize(&self) -> Result<Linearization> {
        let (solver, u) = match self {
            Forward::Elliptic(p) => {
                let s = EllipticSolver::new(p)?;
                let u = s.solve()?;
                (Solver::Elliptic(s), Solution::Elliptic(u))
            }
            Forward::Parabolic(p) => {
                let s = ParabolicSolver::for_problem(p)?;
                let u = s.solve(&p.g, &p.h, p.initial.as_ref())?;
                (Solver::Parabolic(s), Solution::Parabolic(u))
            }
        };
        Ok(Linearization {
            forward: self.clone(),
            solver,
            u,
        })
    }
}

#[derive(Debug, Clone)]
enum Solver {
    Elliptic(EllipticSolver),
    Parabolic(ParabolicSolver),
}

/// Forward solution at one coefficient together with its factored operator.
#[derive(Debug, Clone)]
pub struct Linearization {
    forward: Forward,
    solver: Solver,
    u: Solution,
}

impl Linearization {
    pub fn forward(&self) -> &Forward {
        &self.forward
    }

    pub fn solution(&self) -> &Solution {
        &self.u
    }

    pub fn sensitivity(&self, d: &BoundaryTrace) -> Result<Solution> {
        Ok(match (&self.solver, &self.u) {
            (Solver::Elliptic(s), Solution::Elliptic(u)) => {
                Solution::Elliptic(s.sensitivity(u, d)?)
            }
            (Solver::Parabolic(s), Solution::Parabolic(u)) => {
                Solution::Parabolic(s.sensitivity(u, d)?)
            }
            _ => unreachable!("solver and solution kinds always agree"),
        })
    }

    /// Stacked outer trace of `w(d)`: the derivative of the data map.
    pub fn sensitivity_data(&self, d: &BoundaryTrace) -> Result<Vec<f64>> {
        Ok(self.sensitivity(d)?.outer_trace().stacked())
    }

    /// `N(d)`, the outer normal derivative of `w(d)`.
    pub fn apply_n(&self, d: &BoundaryTrace) -> Result<DataTrace> {
        let w = self.sensitivity(d)?;
        let grid = self.forward.grid();
        Ok(match (&w, self.forward.outer_bc()) {
            (_, OuterBc::Robin1) => negate(w.outer_trace()),
            (Solution::Elliptic(f), _) => {
                DataTrace::Elliptic(normal_derivative(f, Boundary::Outer, grid))
            }
            (Solution::Parabolic(_), _) => unreachable!("parabolic problems use Robin1"),
        })
    }
}

fn negate(t: DataTrace) -> DataTrace {
    match t {
        DataTrace::Elliptic(b) => DataTrace::Elliptic(b.scaled(-1.0)),
        DataTrace::Parabolic(tt) => DataTrace::Parabolic(TimeTrace {
            snapshots: tt.snapshots.iter().map(|s| s.scaled(-1.0)).collect(),
        }),
    }
}

pub fn apply_n(lin: &Linearization, d: &BoundaryTrace) -> Result<DataTrace> {
    lin.apply_n(d)
}

/// Unit perturbation at angular node `j` of the inner circle.
pub fn unit_direction(n_theta: usize, j: usize) -> BoundaryTrace {
    let mut v = vec![0.0; n_theta];
    v[j] = 1.0;
    BoundaryTrace::new(Boundary::Inner, v)
}

/// Dense matrix of `N`: column `j` is `N` of the `j`-th unit perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedMap {
    pub kind: MapKind,
    pub outer_bc: OuterBc,
    pub matrix: DMatrix<f64>,
    pub gamma_star: RobinCoefficient,
    pub u_star: Solution,
}

impl LinearizedMap {
    pub fn apply(&self, d: &BoundaryTrace) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(&d.values))
            .as_slice()
            .to_vec()
    }
}

/// Stacks per-column vectors into an `m × n` matrix.
pub(crate) fn columns_to_matrix(m: usize, cols: Vec<Vec<f64>>) -> DMatrix<f64> {
    let n = cols.len();
    DMatrix::from_iterator(m, n, cols.into_iter().flatten())
}

/// One column solve per angular node, run through `exec`.
pub fn assemble_n_matrix<E: Executor>(lin: &Linearization, exec: &E) -> Result<LinearizedMap> {
    let n = lin.forward.grid().n_theta();
    let cols = exec.map(n, |j| {
        lin.apply_n(&unit_direction(n, j)).map(|t| t.stacked())
    });
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LinearizedMap {
        kind: lin.forward.kind(),
        outer_bc: lin.forward.outer_bc(),
        matrix: columns_to_matrix(lin.forward.data_len(), cols),
        gamma_star: lin.forward.gamma().clone(),
        u_star: lin.u.clone(),
    })
}

/// Least-squares `d` minimizing `‖N d - φ‖² + reg ‖d‖²` (Euclidean norms on
/// the node vectors). With `reg = 0` this is the pseudoinverse solution and a
/// smallest singular value below `RANK_THRESHOLD · σ_max` is an error.
pub fn solve_n(map: &LinearizedMap, phi: &[f64], reg: f64) -> Result<BoundaryTrace> {
    let (m, n) = map.matrix.shape();
    if phi.len() != m {
        return Err(Error::DimensionMismatch {
            what: "phi",
            expected: m,
            found: phi.len(),
        });
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "regularization must be nonnegative, got {reg}"
        )));
    }
    let svd = map.matrix.clone().svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.iter().fold(0.0f64, |a, &b| a.max(b));
    let s_min = s.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if reg == 0.0 && (n > m || !(s_min > RANK_THRESHOLD * s_max)) {
        return Err(Error::RankDeficient {
            sigma_min: if n > m { 0.0 } else { s_min },
            threshold: RANK_THRESHOLD * s_max,
        });
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let b = DVector::from_column_slice(phi);
    let utb = u.transpose() * b;
    let mut coef = DVector::zeros(s.len());
    for k in 0..s.len() {
        let sk = s[k];
        if sk > 0.0 {
            coef[k] = sk / (sk * sk + reg) * utb[k];
        }
    }
    let d = vt.transpose() * coef;
    Ok(BoundaryTrace::new(Boundary::Inner, d.as_slice().to_vec()))
}

/// Least squares restricted to constant perturbations `d ≡ c`, the subspace
/// on which bijectivity is proven.
pub fn solve_n_radial(map: &LinearizedMap, phi: &[f64]) -> Result<BoundaryTrace> {
    let (m, n) = map.matrix.shape();
    if phi.len() != m {
        return Err(Error::DimensionMismatch {
            what: "phi",
            expected: m,
            found: phi.len(),
        });
    }
    let col: Vec<f64> = (0..m).map(|i| map.matrix.row(i).sum()).collect();
    let nn: f64 = col.iter().map(|v| v * v).sum();
    if !(nn > 0.0) {
        return Err(Error::RankDeficient {
            sigma_min: 0.0,
            threshold: 0.0,
        });
    }
    let c = col.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>() / nn;
    Ok(BoundaryTrace::constant(Boundary::Inner, n, c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningReport {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `|N e_k|` for the Fourier mode `e_k = exp(i k θ)`, `k = 0..=n_theta/2`,
    /// normalised by `|e_k|`; only when `γ*` is radial (circulant map).
    pub mode_responses: Option<Vec<f64>>,
}

impl ConditioningReport {
    pub fn condition_number(&self) -> f64 {
        if self.sigma_min > 0.0 {
            self.sigma_max / self.sigma_min
        } else {
            f64::INFINITY
        }
    }
}

pub fn conditioning_report(map: &LinearizedMap) -> ConditioningReport {
    let mut sv: Vec<f64> = map.matrix.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let mode_responses = map
        .gamma_star
        .is_radial()
        .then(|| mode_responses(&map.matrix));
    ConditioningReport {
        singular_values: sv,
        sigma_max,
        sigma_min,
        mode_responses,
    }
}

/// Each `n_theta` block of a column-circulant map is diagonalised by the
/// DFT; the response of mode `k` is the DFT of the first column, block by
/// block, combined in the Euclidean norm.
fn mode_responses(matrix: &DMatrix<f64>) -> Vec<f64> {
    let n = matrix.ncols();
    let blocks = matrix.nrows() / n;
    let col = matrix.column(0);
    (0..=n / 2)
        .map(|k| {
            let mut acc = 0.0;
            for b in 0..blocks {
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..n {
                    let a = -2.0 * core::f64::consts::PI * (k * j % n) as f64 / n as f64;
                    re += col[b * n + j] * libm::cos(a);
                    im += col[b * n + j] * libm::sin(a);
                }
                acc += re * re + im * im;
            }
            libm::sqrt(acc)
        })
        .collect()
}
