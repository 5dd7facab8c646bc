//! Stationary Robin problem on the annulus
//!
//! ```text
//!   -Δu = f              in Ω
//!   ∂u/∂n + γ u = g      on r = r1   (∂/∂n = -∂/∂r)
//!   ∂u/∂n + u = h        on r = r2   (∂/∂n = +∂/∂r)
//! ```
//!
//! discretized with the centred five-point polar Laplacian at interior nodes
//! and second-order one-sided radial differences in the boundary rows. The
//! sensitivity `w = u'(γ)d` solves the same operator with the inner data
//! replaced by `-d u` and homogeneous outer data, so it reuses the factored
//! matrix of the forward solve.

use alloc::vec;
use alloc::vec::Vec;

use crate::band::{relative_residual, BandLu, BandMatrix};
use crate::coefficient::RobinCoefficient;
use crate::error::{Error, Result};
use crate::geometry::{AnnulusGrid, Boundary, BoundaryTrace, Field};

/// Relative residual every linear solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Condition imposed on the outer (accessible) circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OuterBc {
    /// `∂u/∂n + u = h`; the only condition the stability theory covers.
    #[default]
    Robin1,
    /// `∂u/∂n = h`; comparison harness only.
    Neumann,
    /// `u = h`; comparison harness only.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticProblem {
    pub grid: AnnulusGrid,
    pub gamma: RobinCoefficient,
    pub f: Field,
    pub g: BoundaryTrace,
    pub h: BoundaryTrace,
    pub outer_bc: OuterBc,
}

impl EllipticProblem {
    pub fn new(
        grid: AnnulusGrid,
        gamma: RobinCoefficient,
        f: Field,
        g: BoundaryTrace,
        h: BoundaryTrace,
    ) -> Result<Self> {
        let p = Self {
            grid,
            gamma,
            f,
            g,
            h,
            outer_bc: OuterBc::Robin1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_outer_bc(mut self, outer_bc: OuterBc) -> Self {
        self.outer_bc = outer_bc;
        self
    }

    /// Same data, different Robin coefficient.
    pub fn with_gamma(&self, gamma: RobinCoefficient) -> Result<Self> {
        gamma.check(&self.grid)?;
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }

    /// Zero source with boundary data manufactured from the radial harmonic
    /// `u*(r) = c1 + c2 ln r`, so that `u*` solves the problem exactly.
    pub fn radial_manufactured(
        grid: AnnulusGrid,
        gamma: RobinCoefficient,
        c1: f64,
        c2: f64,
        outer_bc: OuterBc,
    ) -> Result<Self> {
        gamma.check(&grid)?;
        let (r1, r2) = (grid.r1(), grid.r2());
        let u = |r: f64| c1 + c2 * libm::log(r);
        let g = BoundaryTrace::new(
            Boundary::Inner,
            gamma
                .values()
                .iter()
                .map(|&gm| -c2 / r1 + gm * u(r1))
                .collect(),
        );
        let h_value = match outer_bc {
            OuterBc::Robin1 => c2 / r2 + u(r2),
            OuterBc::Neumann => c2 / r2,
            OuterBc::Dirichlet => u(r2),
        };
        let h = BoundaryTrace::constant(Boundary::Outer, grid.n_theta(), h_value);
        let f = Field::zeros(&grid);
        Ok(Self::new(grid, gamma, f, g, h)?.with_outer_bc(outer_bc))
    }

    pub fn validate(&self) -> Result<()> {
        self.gamma.check(&self.grid)?;
        self.f.check(&self.grid, "source f")?;
        self.g.check(&self.grid, "inner data g")?;
        self.h.check(&self.grid, "outer data h")?;
        if self.g.boundary != Boundary::Inner || self.h.boundary != Boundary::Outer {
            return Err(Error::InvalidArgument(
                "g must live on the inner circle and h on the outer".into(),
            ));
        }
        Ok(())
    }
}

/// Square banded system `A u = b` over all `n_r * n_theta` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: BandMatrix,
    pub rhs: Vec<f64>,
}

/// Coefficients of `-Δ` at interior row `i`: `(below, above, centre, angular)`
/// multiplying `u[i-1, j]`, `u[i+1, j]`, `u[i, j]` and each of `u[i, j±1]`.
pub(crate) fn laplacian_row(grid: &AnnulusGrid, i: usize) -> (f64, f64, f64, f64) {
    let h = grid.h_r();
    let ht = grid.h_theta();
    let r = grid.r_nodes()[i];
    let below = -(1.0 / (h * h) - 1.0 / (2.0 * h * r));
    let above = -(1.0 / (h * h) + 1.0 / (2.0 * h * r));
    let ang = -1.0 / (r * r * ht * ht);
    let centre = 2.0 / (h * h) - 2.0 * ang;
    (below, above, centre, ang)
}

/// Operator matrix: `-Δ` rows (each scaled by `interior_scale(r)`), inner
/// Robin rows with coefficient `gamma`, outer rows per `outer_bc`.
pub(crate) fn assemble_operator(
    grid: &AnnulusGrid,
    gamma: &[f64],
    outer_bc: OuterBc,
    interior_scale: impl Fn(f64) -> f64,
) -> BandMatrix {
    let (n_r, n_t) = (grid.n_r(), grid.n_theta());
    let mut a = BandMatrix::zeros(grid.len(), 2 * n_t, 2 * n_t);
    let h = grid.h_r();
    let s = 1.0 / (2.0 * h);
    for j in 0..n_t {
        // ∂u/∂n = -∂u/∂r ≈ (3u0 - 4u1 + u2) / 2h
        let k = grid.index(0, j);
        a.add(k, k, 3.0 * s + gamma[j]);
        a.add(k, grid.index(1, j), -4.0 * s);
        a.add(k, grid.index(2, j), s);
    }
    for i in 1..n_r - 1 {
        let (below, above, centre, ang) = laplacian_row(grid, i);
        let sc = interior_scale(grid.r_nodes()[i]);
        for j in 0..n_t {
            let k = grid.index(i, j);
            let (jm, jp) = grid.theta_neighbours(j);
            a.add(k, k, sc * centre);
            a.add(k, grid.index(i - 1, j), sc * below);
            a.add(k, grid.index(i + 1, j), sc * above);
            a.add(k, grid.index(i, jm), sc * ang);
            a.add(k, grid.index(i, jp), sc * ang);
        }
    }
    let last = n_r - 1;
    for j in 0..n_t {
        // ∂u/∂n = ∂u/∂r ≈ (3u_N - 4u_{N-1} + u_{N-2}) / 2h
        let k = grid.index(last, j);
        match outer_bc {
            OuterBc::Dirichlet => a.add(k, k, 1.0),
            OuterBc::Robin1 | OuterBc::Neumann => {
                let robin = if outer_bc == OuterBc::Robin1 {
                    1.0
                } else {
                    0.0
                };
                a.add(k, k, 3.0 * s + robin);
                a.add(k, grid.index(last - 1, j), -4.0 * s);
                a.add(k, grid.index(last - 2, j), s);
            }
        }
    }
    a
}

/// Writes inner/outer boundary data into the boundary rows of `rhs`.
pub(crate) fn set_boundary_rhs(grid: &AnnulusGrid, rhs: &mut [f64], g: &[f64], h: &[f64]) {
    let n_t = grid.n_theta();
    let last = grid.n_r() - 1;
    rhs[..n_t].copy_from_slice(g);
    rhs[last * n_t..].copy_from_slice(h);
}

pub fn assemble(problem: &EllipticProblem) -> LinearSystem {
    let grid = &problem.grid;
    let matrix = assemble_operator(grid, problem.gamma.values(), problem.outer_bc, |_| 1.0);
    let mut rhs = problem.f.values().to_vec();
    set_boundary_rhs(grid, &mut rhs, &problem.g.values, &problem.h.values);
    LinearSystem { matrix, rhs }
}

/// Factored forward operator for one problem; forward and sensitivity solves
/// share the factorization.
#[derive(Debug, Clone)]
pub struct EllipticSolver {
    grid: AnnulusGrid,
    system: LinearSystem,
    lu: BandLu,
}

impl EllipticSolver {
    pub fn new(problem: &EllipticProblem) -> Result<Self> {
        problem.validate()?;
        let system = assemble(problem);
        let lu = BandLu::factor(&system.matrix)?;
        Ok(Self {
            grid: problem.grid.clone(),
            system,
            lu,
        })
    }

    pub fn grid(&self) -> &AnnulusGrid {
        &self.grid
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    /// Solves `A x = b` for an arbitrary right-hand side, with one round of
    /// iterative refinement if the residual contract is missed.
    pub fn solve_rhs(&self, b: &[f64]) -> Result<Vec<f64>> {
        let a = &self.system.matrix;
        let mut x = self.lu.solve(b);
        let mut res = relative_residual(a, &x, b);
        if res > SOLVE_TOLERANCE {
            let r: Vec<f64> = (0..a.n()).map(|i| b[i] - a.row_dot(i, &x)).collect();
            let dx = self.lu.solve(&r);
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
            res = relative_residual(a, &x, b);
        }
        if !(res <= SOLVE_TOLERANCE) {
            return Err(Error::SolveFailed {
                residual: res,
                tolerance: SOLVE_TOLERANCE,
                step: None,
            });
        }
        Ok(x)
    }

    pub fn solve(&self) -> Result<Field> {
        let x = self.solve_rhs(&self.system.rhs)?;
        Field::from_values(&self.grid, x)
    }

    /// `w = u'(γ)d`: same operator, inner data `-d u`, everything else zero.
    pub fn sensitivity(&self, u: &Field, d: &BoundaryTrace) -> Result<Field> {
        u.check(&self.grid, "forward solution")?;
        d.check(&self.grid, "direction d")?;
        let mut rhs = vec![0.0; self.grid.len()];
        for (j, (r, &dj)) in rhs.iter_mut().zip(&d.values).enumerate() {
            *r = -dj * u.get(0, j);
        }
        let x = self.solve_rhs(&rhs)?;
        Field::from_values(&self.grid, x)
    }
}

pub fn solve_elliptic(problem: &EllipticProblem) -> Result<Field> {
    EllipticSolver::new(problem)?.solve()
}

/// Sensitivity solve for a one-off direction. Prefer [`EllipticSolver`] when
/// several directions share one forward solution.
pub fn solve_sensitivity(problem: &EllipticProblem, u: &Field, d: &BoundaryTrace) -> Result<Field> {
    EllipticSolver::new(problem)?.sensitivity(u, d)
}

/// Node values on a boundary circle.
pub fn trace(field: &Field, boundary: Boundary) -> BoundaryTrace {
    let i = match boundary {
        Boundary::Inner => 0,
        Boundary::Outer => field.n_r() - 1,
    };
    BoundaryTrace::new(boundary, field.row(i).to_vec())
}

/// Outward normal derivative by the same one-sided stencil as the boundary rows.
pub fn normal_derivative(field: &Field, boundary: Boundary, grid: &AnnulusGrid) -> BoundaryTrace {
    let s = 1.0 / (2.0 * grid.h_r());
    let (a, b, c) = match boundary {
        Boundary::Inner => (0, 1, 2),
        Boundary::Outer => {
            let n = field.n_r() - 1;
            (n, n - 1, n - 2)
        }
    };
    let values = (0..field.n_theta())
        .map(|j| s * (3.0 * field.get(a, j) - 4.0 * field.get(b, j) + field.get(c, j)))
        .collect();
    BoundaryTrace::new(boundary, values)
}

/// `c1 + c2 ln r` at every node: the radial harmonic functions.
pub fn radial_harmonic_oracle(c1: f64, c2: f64, grid: &AnnulusGrid) -> Field {
    Field::from_fn(grid, |r, _| c1 + c2 * libm::log(r))
}

/// Constants `(c1, c2)` of the radial harmonic that satisfies the homogeneous
/// outer condition `∂w/∂n + w = 0` with `c2 = -1`: `c1 = 1/r2 + ln r2`.
pub fn homogeneous_outer_harmonic(r2: f64) -> (f64, f64) {
    (1.0 / r2 + libm::log(r2), -1.0)
}

/// Constant inner perturbation `d` whose sensitivity is the harmonic
/// `w = 1/r2 + ln r2 - ln r`, so that `N(d) = ∂w/∂n|_{r2} = -1/r2`:
///
/// `d = -1/(r1 u*(r1)) - γ*(r1)/u*(r1) · (1/r2 + ln r2 - ln r1)`.
pub fn surjectivity_direction_elliptic(
    r1: f64,
    r2: f64,
    gamma_star_r1: f64,
    u_star_r1: f64,
) -> Result<f64> {
    if u_star_r1 == 0.0 || !u_star_r1.is_finite() {
        return Err(Error::NotIdentifiable { value: u_star_r1 });
    }
    let w_r1 = 1.0 / r2 + libm::log(r2) - libm::log(r1);
    Ok(-1.0 / (r1 * u_star_r1) - gamma_star_r1 / u_star_r1 * w_r1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field_norm_l2;

    fn grid(n_r: usize, n_t: usize) -> AnnulusGrid {
        AnnulusGrid::new(1.0, 2.0, n_r, n_t).unwrap()
    }

    fn gamma(g: &AnnulusGrid, v: f64) -> RobinCoefficient {
        RobinCoefficient::constant(g.n_theta(), v, 0.5, 3.0).unwrap()
    }

    #[test]
    fn interior_rows_annihilate_constants() {
        let g = grid(9, 8);
        let p = EllipticProblem::radial_manufactured(
            g.clone(),
            gamma(&g, 1.2),
            0.0,
            0.0,
            OuterBc::Robin1,
        )
        .unwrap();
        let sys = assemble(&p);
        let ones = vec![1.0; g.len()];
        let au = sys.matrix.mul_vec(&ones);
        for i in 1..g.n_r() - 1 {
            for j in 0..g.n_theta() {
                assert!(au[g.index(i, j)].abs() < 1e-11);
            }
        }
    }

    #[test]
    fn boundary_rows_on_radial_harmonic() {
        let (c1, c2, gm) = (0.7, -1.3, 1.4);
        let mut errs = Vec::new();
        for &n in &[17usize, 33, 65] {
            let g = grid(n, 4);
            let p = EllipticProblem::radial_manufactured(
                g.clone(),
                gamma(&g, gm),
                0.0,
                0.0,
                OuterBc::Robin1,
            )
            .unwrap();
            let sys = assemble(&p);
            let w = radial_harmonic_oracle(c1, c2, &g);
            let aw = sys.matrix.mul_vec(w.values());
            // symbolic: -∂w/∂r + γw at r1 and ∂w/∂r + w at r2, ∂w/∂r = c2/r
            let inner = -c2 / 1.0 + gm * c1;
            let outer = c2 / 2.0 + c1 + c2 * libm::log(2.0);
            let last = g.index(n - 1, 0);
            errs.push(((aw[0] - inner).abs(), (aw[last] - outer).abs()));
        }
        for k in 0..2 {
            let r0 = errs[k].0 / errs[k + 1].0;
            let r1 = errs[k].1 / errs[k + 1].1;
            assert!(r0 > 3.5 && r1 > 3.5, "{errs:?}");
        }
        assert!(errs[2].0 < 1e-3 && errs[2].1 < 1e-3);
    }

    #[test]
    fn manufactured_radial_solution_converges() {
        let (c1, c2) = (2.0, 0.5);
        let mut errs = Vec::new();
        for &n in &[33usize, 65, 129] {
            let g = grid(n, 8);
            let p = EllipticProblem::radial_manufactured(
                g.clone(),
                gamma(&g, 1.5),
                c1,
                c2,
                OuterBc::Robin1,
            )
            .unwrap();
            let u = solve_elliptic(&p).unwrap();
            let exact = radial_harmonic_oracle(c1, c2, &g);
            errs.push(field_norm_l2(&u.sub(&exact), &g));
        }
        for k in 0..2 {
            let order = libm::log2(errs[k] / errs[k + 1]);
            assert!(order > 1.9, "order {order} from {errs:?}");
        }
    }

    #[test]
    fn neumann_and_dirichlet_manufactured() {
        for bc in [OuterBc::Neumann, OuterBc::Dirichlet] {
            let g = grid(65, 8);
            let p = EllipticProblem::radial_manufactured(g.clone(), gamma(&g, 1.0), 1.0, -0.5, bc)
                .unwrap();
            let u = solve_elliptic(&p).unwrap();
            let exact = radial_harmonic_oracle(1.0, -0.5, &g);
            let err = field_norm_l2(&u.sub(&exact), &g);
            assert!(err < 5e-4, "{bc:?}: {err}");
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = grid(9, 8);
        let p = EllipticProblem::radial_manufactured(
            g.clone(),
            gamma(&g, 1.0),
            0.0,
            0.0,
            OuterBc::Robin1,
        )
        .unwrap();
        let u = solve_elliptic(&p).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn constructed_harmonic_has_homogeneous_outer_condition() {
        let r2 = 2.0;
        let (c1, c2) = homogeneous_outer_harmonic(r2);
        assert!((c1 - (0.5 + libm::log(2.0))).abs() < 1e-15);
        assert_eq!(c2, -1.0);
        // exact: ∂w/∂r = -1/r, w(r2) = 1/r2
        let dwdn = c2 / r2;
        let w = c1 + c2 * libm::log(r2);
        assert!((dwdn + w).abs() < 1e-15);
        // discrete: one-sided stencil residual shrinks with refinement
        let mut prev = f64::INFINITY;
        for &n in &[33usize, 65, 129] {
            let g = grid(n, 4);
            let w = radial_harmonic_oracle(c1, c2, &g);
            let dn = normal_derivative(&w, Boundary::Outer, &g);
            let tr = trace(&w, Boundary::Outer);
            let res = dn
                .values
                .iter()
                .zip(&tr.values)
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max);
            assert!(res < prev);
            prev = res;
        }
        assert!(prev < 5e-3);
    }

    #[test]
    fn normal_derivative_signs() {
        let g = grid(129, 4);
        let w = radial_harmonic_oracle(0.0, 1.0, &g);
        let outer = normal_derivative(&w, Boundary::Outer, &g);
        let inner = normal_derivative(&w, Boundary::Inner, &g);
        assert!((outer.values[0] - 0.5).abs() < 1e-4);
        assert!((inner.values[0] + 1.0).abs() < 1e-4);
        let c = Field::from_fn(&g, |_, _| 3.0);
        assert!(normal_derivative(&c, Boundary::Inner, &g)
            .values
            .iter()
            .all(|v| v.abs() < 1e-12));
        assert!(normal_derivative(&c, Boundary::Outer, &g)
            .values
            .iter()
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn traces() {
        let g = grid(9, 6);
        let w = radial_harmonic_oracle(1.0, 2.0, &g);
        let t = trace(&w, Boundary::Outer);
        assert!(t
            .values
            .iter()
            .all(|v| (v - (1.0 + 2.0 * libm::log(2.0))).abs() < 1e-15));
        assert!(trace(&w, Boundary::Inner).values.iter().all(|&v| v == 1.0));
        assert!(trace(&Field::zeros(&g), Boundary::Inner)
            .values
            .iter()
            .all(|&v| v == 0.0));
        let one = radial_harmonic_oracle(1.0, 0.0, &g);
        assert!(one.values().iter().all(|&v| v == 1.0));
        assert_eq!(radial_harmonic_oracle(0.0, 0.0, &g).max_abs(), 0.0);
    }

    #[test]
    fn surjectivity_direction_values() {
        let e = core::f64::consts::E;
        assert!((surjectivity_direction_elliptic(1.0, e, 0.0, 1.0).unwrap() + 1.0).abs() < 1e-15);
        let gs = 1.7;
        let d = surjectivity_direction_elliptic(1.0, 1.0, gs, 1.0).unwrap();
        assert!((d - (-1.0 - gs)).abs() < 1e-15);
        assert!(matches!(
            surjectivity_direction_elliptic(1.0, 2.0, 1.0, 0.0),
            Err(Error::NotIdentifiable { .. })
        ));
    }

    #[test]
    fn sensitivity_zero_and_linear() {
        let g = grid(17, 8);
        let p = EllipticProblem::radial_manufactured(
            g.clone(),
            gamma(&g, 1.5),
            1.0,
            0.3,
            OuterBc::Robin1,
        )
        .unwrap();
        let s = EllipticSolver::new(&p).unwrap();
        let u = s.solve().unwrap();
        let zero = s
            .sensitivity(&u, &BoundaryTrace::zeros(Boundary::Inner, 8))
            .unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let d1 = BoundaryTrace::from_fn(&g, Boundary::Inner, libm::cos);
        let d2 = BoundaryTrace::from_fn(&g, Boundary::Inner, |t| 1.0 + libm::sin(2.0 * t));
        let (a, b) = (0.7, -2.1);
        let mix = BoundaryTrace::new(
            Boundary::Inner,
            d1.values
                .iter()
                .zip(&d2.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        );
        let w1 = s.sensitivity(&u, &d1).unwrap();
        let w2 = s.sensitivity(&u, &d2).unwrap();
        let wm = s.sensitivity(&u, &mix).unwrap();
        for k in 0..g.len() {
            let lin = a * w1.values()[k] + b * w2.values()[k];
            assert!((wm.values()[k] - lin).abs() < 1e-10 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn sensitivity_matches_finite_differences_to_first_order() {
        let g = grid(17, 8);
        let gm = RobinCoefficient::new(
            (0..8).map(|j| 1.5 + 0.2 * libm::cos(j as f64)).collect(),
            0.5,
            3.0,
        )
        .unwrap();
        let p =
            EllipticProblem::radial_manufactured(g.clone(), gm.clone(), 1.0, 0.3, OuterBc::Robin1)
                .unwrap();
        let s = EllipticSolver::new(&p).unwrap();
        let u = s.solve().unwrap();
        let d = BoundaryTrace::from_fn(&g, Boundary::Inner, |t| 0.5 + libm::sin(t));
        let w = s.sensitivity(&u, &d).unwrap();
        let mut errs = Vec::new();
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let gp = gm
                .with_values(
                    gm.values()
                        .iter()
                        .zip(&d.values)
                        .map(|(a, b)| a + eps * b)
                        .collect(),
                )
                .unwrap();
            let up = solve_elliptic(&p.with_gamma(gp).unwrap()).unwrap();
            let fd = up.sub(&u);
            let err = fd
                .values()
                .iter()
                .zip(w.values())
                .map(|(a, b)| (a / eps - b).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        // first order: each decade of eps buys about a decade of error
        assert!(
            errs[0] / errs[1] > 8.0 && errs[1] / errs[2] > 8.0,
            "{errs:?}"
        );
    }

    #[test]
    fn radial_data_gives_theta_independent_solution() {
        let g = grid(33, 16);
        let p = EllipticProblem::radial_manufactured(
            g.clone(),
            gamma(&g, 2.0),
            1.0,
            -0.4,
            OuterBc::Robin1,
        )
        .unwrap();
        let u = solve_elliptic(&p).unwrap();
        for i in 0..g.n_r() {
            let row = u.row(i);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            let sd = libm::sqrt(
                row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / row.len() as f64,
            );
            assert!(sd <= SOLVE_TOLERANCE * 100.0, "row {i}: {sd}");
        }
    }
}
