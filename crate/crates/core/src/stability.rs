//! Empirical Lipschitz constants of the inverse map near a reference
//! coefficient, and the outer boundary condition comparison.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::coefficient::RobinCoefficient;
use crate::elliptic::{normal_derivative, trace, EllipticProblem, OuterBc};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::{boundary_norm, Boundary};
use crate::inverse::jacobian;
use crate::linop::{assemble_n_matrix, Forward, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ProbeMode {
    /// Constant perturbations only.
    #[default]
    RadialOnly,
    /// Arbitrary nodal perturbations.
    FullAngle,
}

impl ProbeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeMode::RadialOnly => "radial",
            ProbeMode::FullAngle => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub index: usize,
    /// `‖γ1 - γ2‖_{Γi}`.
    pub gamma_distance: f64,
    /// Data-space norm of `u(γ1) - u(γ2)` on the outer circle.
    pub data_distance: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub b: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub mode: ProbeMode,
    pub samples: Vec<ProbeSample>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub p95_ratio: f64,
}

impl StabilityReport {
    fn from_samples(b: f64, seed: u64, mode: ProbeMode, samples: Vec<ProbeSample>) -> Self {
        let mut r: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
        r.sort_by(f64::total_cmp);
        let n = r.len();
        let (max_ratio, min_ratio, median_ratio, p95_ratio) = if n == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let median = if n % 2 == 1 {
                r[n / 2]
            } else {
                0.5 * (r[n / 2 - 1] + r[n / 2])
            };
            // nearest rank
            let k = libm::ceil(0.95 * n as f64) as usize;
            (r[n - 1], r[0], median, r[k.max(1) - 1])
        };
        Self {
            b,
            n_samples: n,
            seed,
            mode,
            samples,
            max_ratio,
            min_ratio,
            median_ratio,
            p95_ratio,
        }
    }
}

/// `‖γ1 - γ2‖_{Γi} / ‖u(γ1) - u(γ2)‖_data`, the data norm being `L²(Γa)`
/// (elliptic) or `L²(0,T; L²(Γa))` (parabolic).
pub fn lipschitz_ratio(
    forward: &Forward,
    gamma1: &RobinCoefficient,
    gamma2: &RobinCoefficient,
) -> Result<f64> {
    Ok(sample_ratio(forward, gamma1, gamma2, 0)?.ratio)
}

fn sample_ratio(
    forward: &Forward,
    gamma1: &RobinCoefficient,
    gamma2: &RobinCoefficient,
    index: usize,
) -> Result<ProbeSample> {
    let grid = forward.grid();
    gamma1.check(grid)?;
    gamma2.check(grid)?;
    if gamma1.values() == gamma2.values() {
        return Err(Error::CoincidentCoefficients);
    }
    let u1 = forward.with_gamma(gamma1.clone())?.outer_data()?;
    let u2 = forward.with_gamma(gamma2.clone())?.outer_data()?;
    let diff: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
    let data_distance = forward.data_norm(&diff);
    if !(data_distance > 0.0) {
        return Err(Error::IdentifiabilityViolation {
            gamma1: gamma1.values().to_vec(),
            gamma2: gamma2.values().to_vec(),
        });
    }
    let gamma_distance = boundary_norm(&gamma1.difference(gamma2), grid);
    Ok(ProbeSample {
        index,
        gamma_distance,
        data_distance,
        ratio: gamma_distance / data_distance,
    })
}

/// Largest pointwise perturbation a draw of radius `b` can produce.
pub fn pointwise_reach(forward: &Forward, b: f64, mode: ProbeMode) -> f64 {
    let grid = forward.grid();
    let r1 = grid.r1();
    match mode {
        ProbeMode::RadialOnly => b / libm::sqrt(2.0 * core::f64::consts::PI * r1),
        ProbeMode::FullAngle => b / libm::sqrt(grid.arc_weight(Boundary::Inner)),
    }
}

/// Uniform draw from `{‖d‖_{Γi} ≤ b}` restricted to the mode's subspace.
fn draw(rng: &mut ChaCha8Rng, n: usize, reach: f64, mode: ProbeMode) -> Vec<f64> {
    match mode {
        ProbeMode::RadialOnly => {
            let c = reach * (2.0 * rng.random::<f64>() - 1.0);
            alloc::vec![c; n]
        }
        ProbeMode::FullAngle => {
            let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = libm::sqrt(xi.iter().map(|v| v * v).sum::<f64>());
            let radius = libm::pow(rng.random::<f64>(), 1.0 / n as f64);
            // reach = b / sqrt(r1 hθ) turns the Euclidean unit ball into the
            // weighted ball of radius b
            let s = reach * radius / norm;
            xi.into_iter().map(|v| v * s).collect()
        }
    }
}

/// Samples `n_samples` independent pairs in the `b`-ball around
/// `forward.gamma()` and reports their Lipschitz ratios. Sample `i` uses the
/// ChaCha8 stream `i` of `seed`, so the report does not depend on `exec`.
pub fn probe_neighborhood<E: Executor>(
    forward: &Forward,
    b: f64,
    n_samples: usize,
    seed: u64,
    mode: ProbeMode,
    exec: &E,
) -> Result<StabilityReport> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "probe radius must be positive, got {b}"
        )));
    }
    let star = forward.gamma();
    let reach = pointwise_reach(forward, b, mode);
    let margin = star
        .values()
        .iter()
        .map(|&g| (g - star.gamma_lo()).min(star.gamma_hi() - g))
        .fold(f64::INFINITY, f64::min);
    if reach > margin {
        return Err(Error::InfeasibleRadius {
            radius: b,
            reach,
            margin,
        });
    }
    let n = forward.grid().n_theta();
    let samples = exec
        .map(n_samples, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let shift = |d: Vec<f64>| {
                let v = star.values().iter().zip(d).map(|(g, d)| g + d).collect();
                star.with_values(v)
            };
            let g1 = shift(draw(&mut rng, n, reach, mode))?;
            let g2 = shift(draw(&mut rng, n, reach, mode))?;
            sample_ratio(forward, &g1, &g2, i)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport::from_samples(b, seed, mode, samples))
}

/// Linearized maps for one outer condition.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterBcRow {
    pub outer_bc: OuterBc,
    /// Mean outer flux `∂w/∂n` for the unit constant perturbation.
    pub constant_flux: f64,
    /// Mean outer trace `w` for the unit constant perturbation.
    pub constant_trace: f64,
    /// Singular values of the flux map `d ↦ ∂w(d)/∂n`, descending.
    pub flux_singular_values: Vec<f64>,
    /// Singular values of the trace map `d ↦ w(d)|_{Γa}`, descending.
    pub trace_singular_values: Vec<f64>,
}

fn sorted_singular_values(m: nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Linearizes the same `u*` under each outer condition. The outer data for
/// Neumann and Dirichlet is read off the Robin solution, so all three
/// problems share `u*` exactly.
pub fn compare_outer_bc<E: Executor>(
    problem: &EllipticProblem,
    exec: &E,
) -> Result<Vec<OuterBcRow>> {
    let base = problem.clone().with_outer_bc(OuterBc::Robin1);
    let Solution::Elliptic(u_star) = Forward::Elliptic(base.clone()).solve()? else {
        unreachable!()
    };
    let grid = &problem.grid;
    let n = grid.n_theta();
    [OuterBc::Robin1, OuterBc::Neumann, OuterBc::Dirichlet]
        .into_iter()
        .map(|bc| {
            let h = match bc {
                OuterBc::Robin1 => base.h.clone(),
                OuterBc::Neumann => normal_derivative(&u_star, Boundary::Outer, grid),
                OuterBc::Dirichlet => trace(&u_star, Boundary::Outer),
            };
            let p = EllipticProblem {
                h,
                outer_bc: bc,
                ..base.clone()
            };
            let lin = Forward::Elliptic(p).linearize()?;
            let flux = assemble_n_matrix(&lin, exec)?.matrix;
            let tr = jacobian(&lin, exec)?;
            let mean_row_sum = |m: &nalgebra::DMatrix<f64>| {
                (0..m.nrows()).map(|i| m.row(i).sum()).sum::<f64>() / m.nrows() as f64
            };
            debug_assert_eq!(flux.ncols(), n);
            Ok(OuterBcRow {
                outer_bc: bc,
                constant_flux: mean_row_sum(&flux),
                constant_trace: mean_row_sum(&tr),
                flux_singular_values: sorted_singular_values(flux),
                trace_singular_values: sorted_singular_values(tr),
            })
        })
        .collect()
}
