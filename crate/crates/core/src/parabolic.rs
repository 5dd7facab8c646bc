//! Time-dependent Robin problem with diffusion coefficient `|x|² = r²`
//!
//! ```text
//!   ∂_t u - r² Δu = 0       in Ω × [0, T]
//!   ∂u/∂n + γ u = g(t)      on r = r1
//!   ∂u/∂n + u = h(t)        on r = r2
//!   u(·, 0) = u0            (zero unless an oracle test supplies one)
//! ```
//!
//! The spatial operator is the elliptic stencil with each interior row scaled
//! by `r²`; boundary rows stay algebraic and are enforced at every new time
//! level. The θ-scheme matrix is constant in time and factored once.

use alloc::vec;
use alloc::vec::Vec;

use crate::band::{relative_residual, BandLu, BandMatrix};
use crate::coefficient::RobinCoefficient;
use crate::elliptic::{assemble_operator, set_boundary_rhs, OuterBc, SOLVE_TOLERANCE};
use crate::error::{Error, Result};
use crate::geometry::{boundary_norm, AnnulusGrid, Boundary, BoundaryTrace, Field};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_t: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_t: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if n_t == 0 {
            return Err(Error::InvalidArgument("need at least one time step".into()));
        }
        Ok(Self { t_final, n_t })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_t as f64
    }

    pub fn t(&self, n: usize) -> f64 {
        if n == self.n_t {
            self.t_final
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        (0..=self.n_t).map(|n| self.t(n)).collect()
    }

    /// Trapezoid weights over the `n_t + 1` time nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_t)
            .map(|n| {
                if n == 0 || n == self.n_t {
                    0.5 * dt
                } else {
                    dt
                }
            })
            .collect()
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    fn implicit_weight(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

/// One [`Field`] per time node.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeField {
    pub snapshots: Vec<Field>,
}

impl TimeField {
    pub fn last(&self) -> &Field {
        self.snapshots
            .last()
            .expect("time field has at least one snapshot")
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.snapshots
            .iter()
            .map(Field::max_abs)
            .fold(0.0, f64::max)
    }

    /// Boundary trace of every snapshot.
    pub fn trace(&self, boundary: Boundary) -> TimeTrace {
        TimeTrace {
            snapshots: self
                .snapshots
                .iter()
                .map(|f| crate::elliptic::trace(f, boundary))
                .collect(),
        }
    }
}

/// One [`BoundaryTrace`] per time node.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub snapshots: Vec<BoundaryTrace>,
}

impl TimeTrace {
    pub fn zeros(boundary: Boundary, n_theta: usize, time: &TimeGrid) -> Self {
        Self {
            snapshots: vec![BoundaryTrace::zeros(boundary, n_theta); time.n_t() + 1],
        }
    }

    /// Snapshot `n` is `f(t_n, theta_j)` at each angular node.
    pub fn from_fn(
        grid: &AnnulusGrid,
        boundary: Boundary,
        time: &TimeGrid,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            snapshots: time
                .t_nodes()
                .into_iter()
                .map(|t| BoundaryTrace::from_fn(grid, boundary, |th| f(t, th)))
                .collect(),
        }
    }

    /// Snapshots concatenated time-major.
    pub fn stacked(&self) -> Vec<f64> {
        self.snapshots
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .collect()
    }

    pub fn from_stacked(boundary: Boundary, n_theta: usize, values: &[f64]) -> Self {
        Self {
            snapshots: values
                .chunks(n_theta)
                .map(|c| BoundaryTrace::new(boundary, c.to_vec()))
                .collect(),
        }
    }

    pub(crate) fn check(
        &self,
        grid: &AnnulusGrid,
        time: &TimeGrid,
        boundary: Boundary,
        what: &'static str,
    ) -> Result<()> {
        if self.snapshots.len() != time.n_t() + 1 {
            return Err(Error::DimensionMismatch {
                what,
                expected: time.n_t() + 1,
                found: self.snapshots.len(),
            });
        }
        for s in &self.snapshots {
            s.check(grid, what)?;
            if s.boundary != boundary {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{what} lives on the wrong boundary"
                )));
            }
        }
        Ok(())
    }
}

/// `sqrt(∫_0^T ‖v(t)‖²_Γ dt)` with the trapezoid rule in time.
pub fn time_boundary_norm(trace: &TimeTrace, grid: &AnnulusGrid, time: &TimeGrid) -> f64 {
    let acc: f64 = trace
        .snapshots
        .iter()
        .zip(time.trapezoid_weights())
        .map(|(s, w)| {
            let n = boundary_norm(s, grid);
            w * n * n
        })
        .sum();
    libm::sqrt(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicProblem {
    pub grid: AnnulusGrid,
    pub gamma: RobinCoefficient,
    pub g: TimeTrace,
    pub h: TimeTrace,
    pub time: TimeGrid,
    pub scheme: Scheme,
    /// Initial field; `None` means zero, the physical problem. A nonzero
    /// initial state is only used by the separated-variable oracle.
    pub initial: Option<Field>,
}

impl ParabolicProblem {
    pub fn new(
        grid: AnnulusGrid,
        gamma: RobinCoefficient,
        g: TimeTrace,
        h: TimeTrace,
        time: TimeGrid,
        scheme: Scheme,
    ) -> Result<Self> {
        let p = Self {
            grid,
            gamma,
            g,
            h,
            time,
            scheme,
            initial: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_initial(mut self, initial: Field) -> Result<Self> {
        initial.check(&self.grid, "initial field")?;
        self.initial = Some(initial);
        Ok(self)
    }

    pub fn with_gamma(&self, gamma: RobinCoefficient) -> Result<Self> {
        gamma.check(&self.grid)?;
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Self {
            scheme,
            ..self.clone()
        }
    }

    /// Constant-in-time boundary data with zero initial state.
    pub fn constant_data(
        grid: AnnulusGrid,
        gamma: RobinCoefficient,
        time: TimeGrid,
        scheme: Scheme,
        g0: f64,
        h0: f64,
    ) -> Result<Self> {
        let g = TimeTrace::from_fn(&grid, Boundary::Inner, &time, |_, _| g0);
        let h = TimeTrace::from_fn(&grid, Boundary::Outer, &time, |_, _| h0);
        Self::new(grid, gamma, g, h, time, scheme)
    }

    /// Data manufactured from the separated solution `F(t)(c1 r + c2/r)`,
    /// including its (nonzero) initial state `c1 r + c2/r`.
    pub fn separated_manufactured(
        grid: AnnulusGrid,
        gamma: RobinCoefficient,
        time: TimeGrid,
        scheme: Scheme,
        c1: f64,
        c2: f64,
    ) -> Result<Self> {
        gamma.check(&grid)?;
        let (r1, r2) = (grid.r1(), grid.r2());
        let v = |r: f64| c1 * r + c2 / r;
        let dv = |r: f64| c1 - c2 / (r * r);
        let g = TimeTrace {
            snapshots: time
                .t_nodes()
                .into_iter()
                .map(|t| {
                    let f = separated_factor(t);
                    BoundaryTrace::new(
                        Boundary::Inner,
                        gamma
                            .values()
                            .iter()
                            .map(|&gm| f * (-dv(r1) + gm * v(r1)))
                            .collect(),
                    )
                })
                .collect(),
        };
        let h = TimeTrace::from_fn(&grid, Boundary::Outer, &time, |t, _| {
            separated_factor(t) * (dv(r2) + v(r2))
        });
        let initial = Field::from_fn(&grid, |r, _| v(r));
        Self::new(grid, gamma, g, h, time, scheme)?.with_initial(initial)
    }

    pub fn validate(&self) -> Result<()> {
        self.gamma.check(&self.grid)?;
        self.g
            .check(&self.grid, &self.time, Boundary::Inner, "inner data g")?;
        self.h
            .check(&self.grid, &self.time, Boundary::Outer, "outer data h")?;
        if let Some(u0) = &self.initial {
            u0.check(&self.grid, "initial field")?;
        }
        Ok(())
    }
}

/// Factored θ-scheme stepper for one coefficient; forward and sensitivity
/// marches share it.
#[derive(Debug, Clone)]
pub struct ParabolicSolver {
    grid: AnnulusGrid,
    time: TimeGrid,
    scheme: Scheme,
    /// `r² (-Δ)` interior rows, Robin boundary rows.
    operator: BandMatrix,
    lhs: BandMatrix,
    lu: BandLu,
}

impl ParabolicSolver {
    pub fn new(
        grid: &AnnulusGrid,
        gamma: &RobinCoefficient,
        time: &TimeGrid,
        scheme: Scheme,
    ) -> Result<Self> {
        gamma.check(grid)?;
        let operator = assemble_operator(grid, gamma.values(), OuterBc::Robin1, |r| r * r);
        let mut lhs = operator.clone();
        let theta_dt = scheme.implicit_weight() * time.dt();
        let n_t = grid.n_theta();
        let kl = lhs.lower_bandwidth();
        for i in 1..grid.n_r() - 1 {
            for j in 0..n_t {
                let k = grid.index(i, j);
                let row = lhs.row_slice_mut(k);
                for v in row.iter_mut() {
                    *v *= theta_dt;
                }
                row[kl] += 1.0;
            }
        }
        let lu = BandLu::factor(&lhs)?;
        Ok(Self {
            grid: grid.clone(),
            time: *time,
            scheme,
            operator,
            lhs,
            lu,
        })
    }

    pub fn for_problem(problem: &ParabolicProblem) -> Result<Self> {
        problem.validate()?;
        Self::new(&problem.grid, &problem.gamma, &problem.time, problem.scheme)
    }

    /// Generic march: `inner(n, prev_field?, out)` / `outer(n, out)` fill the
    /// boundary rows for time level `n`, given the snapshot being computed.
    fn march(
        &self,
        initial: Field,
        mut boundary: impl FnMut(usize, &mut [f64], &mut [f64]),
    ) -> Result<TimeField> {
        let grid = &self.grid;
        let n_theta = grid.n_theta();
        let explicit = 1.0 - self.scheme.implicit_weight();
        let dt = self.time.dt();
        let mut snapshots = Vec::with_capacity(self.time.n_t() + 1);
        snapshots.push(initial);
        let mut g = vec![0.0; n_theta];
        let mut h = vec![0.0; n_theta];
        for n in 1..=self.time.n_t() {
            let prev = snapshots.last().unwrap().values();
            let mut rhs = prev.to_vec();
            if explicit > 0.0 {
                for i in 1..grid.n_r() - 1 {
                    for j in 0..n_theta {
                        let k = grid.index(i, j);
                        rhs[k] -= explicit * dt * self.operator.row_dot(k, prev);
                    }
                }
            }
            boundary(n, &mut g, &mut h);
            set_boundary_rhs(grid, &mut rhs, &g, &h);
            let x = self.solve_step(&rhs, n)?;
            snapshots.push(Field::from_values(grid, x)?);
        }
        Ok(TimeField { snapshots })
    }

    fn solve_step(&self, b: &[f64], step: usize) -> Result<Vec<f64>> {
        let mut x = self.lu.solve(b);
        let mut res = relative_residual(&self.lhs, &x, b);
        if res > SOLVE_TOLERANCE {
            let r: Vec<f64> = (0..b.len())
                .map(|i| b[i] - self.lhs.row_dot(i, &x))
                .collect();
            for (xi, di) in x.iter_mut().zip(self.lu.solve(&r)) {
                *xi += di;
            }
            res = relative_residual(&self.lhs, &x, b);
        }
        if !(res <= SOLVE_TOLERANCE) {
            return Err(Error::SolveFailed {
                residual: res,
                tolerance: SOLVE_TOLERANCE,
                step: Some(step),
            });
        }
        Ok(x)
    }

    pub fn solve(
        &self,
        g: &TimeTrace,
        h: &TimeTrace,
        initial: Option<&Field>,
    ) -> Result<TimeField> {
        g.check(&self.grid, &self.time, Boundary::Inner, "inner data g")?;
        h.check(&self.grid, &self.time, Boundary::Outer, "outer data h")?;
        let u0 = match initial {
            Some(f) => {
                f.check(&self.grid, "initial field")?;
                f.clone()
            }
            None => Field::zeros(&self.grid),
        };
        self.march(u0, |n, gb, hb| {
            gb.copy_from_slice(&g.snapshots[n].values);
            hb.copy_from_slice(&h.snapshots[n].values);
        })
    }

    /// `w = u'(γ)p` with zero initial state and inner data `-p u(t)`.
    pub fn sensitivity(&self, u: &TimeField, p: &BoundaryTrace) -> Result<TimeField> {
        p.check(&self.grid, "direction p")?;
        if u.len() != self.time.n_t() + 1 {
            return Err(Error::DimensionMismatch {
                what: "forward solution",
                expected: self.time.n_t() + 1,
                found: u.len(),
            });
        }
        self.march(Field::zeros(&self.grid), |n, gb, hb| {
            let un = &u.snapshots[n];
            for (j, v) in gb.iter_mut().enumerate() {
                *v = -p.values[j] * un.get(0, j);
            }
            hb.iter_mut().for_each(|v| *v = 0.0);
        })
    }
}

pub fn solve_parabolic(problem: &ParabolicProblem) -> Result<TimeField> {
    ParabolicSolver::for_problem(problem)?.solve(&problem.g, &problem.h, problem.initial.as_ref())
}

pub fn solve_parabolic_sensitivity(
    problem: &ParabolicProblem,
    u: &TimeField,
    p: &BoundaryTrace,
) -> Result<TimeField> {
    ParabolicSolver::for_problem(problem)?.sensitivity(u, p)
}

/// Temporal factor `t e^{t - ln t}` of the separated solution, evaluated as
/// written for `t > 0`; at `t = 0` the right limit `1` is returned.
pub fn separated_factor(t: f64) -> f64 {
    if t > 0.0 {
        t * libm::exp(t - libm::log(t))
    } else if t == 0.0 {
        1.0
    } else {
        f64::NAN
    }
}

/// `F(t) (c1 r + c2 / r)` on the space-time grid. The radial part solves the
/// Euler equation `r² V'' + r V' - V = 0`.
pub fn radial_separated_oracle(c1: f64, c2: f64, grid: &AnnulusGrid, time: &TimeGrid) -> TimeField {
    TimeField {
        snapshots: time
            .t_nodes()
            .into_iter()
            .map(|t| {
                let f = separated_factor(t);
                Field::from_fn(grid, |r, _| f * (c1 * r + c2 / r))
            })
            .collect(),
    }
}

/// `(c1, c2)` with `c2 = 1` making `V = c1 r + c2 / r` satisfy
/// `V' + V = 0` at `r2`: `c1 = (1 - r2) / (r2² (1 + r2))`.
pub fn homogeneous_outer_euler(r2: f64) -> (f64, f64) {
    ((1.0 - r2) / (r2 * r2 * (1.0 + r2)), 1.0)
}

/// Constant inner perturbation whose sensitivity is
/// `F(t) (c1 r + 1/r)` with the constants of [`homogeneous_outer_euler`]:
///
/// `d = -(1/v(r1)) { (r2-1)/(r2²(1+r2)) + 1/r1² + γ*(r1) ( (1-r2)/(r2²(1+r2)) r1 + 1/r1 ) }`.
pub fn surjectivity_direction_parabolic(
    r1: f64,
    r2: f64,
    gamma_star_r1: f64,
    v_r1: f64,
) -> Result<f64> {
    if v_r1 == 0.0 || !v_r1.is_finite() {
        return Err(Error::NotIdentifiable { value: v_r1 });
    }
    let q = r2 * r2 * (1.0 + r2);
    let bracket =
        (r2 - 1.0) / q + 1.0 / (r1 * r1) + gamma_star_r1 * ((1.0 - r2) / q * r1 + 1.0 / r1);
    Ok(-bracket / v_r1)
}
