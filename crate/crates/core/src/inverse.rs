//! Reconstruction of the inner Robin coefficient from outer-circle data by
//! projected Levenberg–Marquardt.
//!
//! Residuals are weighted by the square roots of the data quadrature weights
//! so that the least-squares objective is the discrete `½‖u(γ)|_{r2} - z‖²`
//! (time-integrated in the parabolic case).

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::coefficient::RobinCoefficient;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::{boundary_norm, AnnulusGrid, Boundary, BoundaryTrace};
use crate::linop::{columns_to_matrix, unit_direction, Forward, Linearization};

/// Damping above which the iteration gives up.
pub const LAMBDA_MAX: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionOptions {
    pub max_iters: usize,
    /// Absolute threshold on the misfit.
    pub tol_misfit: f64,
    /// Threshold on `‖Δγ‖_{Γi} / (1 + ‖γ‖_{Γi})`.
    pub tol_step: f64,
    pub levenberg_lambda0: f64,
    pub lambda_decrease: f64,
    pub lambda_increase: f64,
    /// Estimated data-norm size of the noise; zero disables discrepancy stopping.
    pub noise_level: f64,
    /// Discrepancy principle factor: stop once `‖r‖ ≤ tau · noise_level`.
    pub discrepancy_tau: f64,
    /// Optional Tikhonov term `½ α ‖γ - γ_ref‖²` (Euclidean on nodes).
    pub tikhonov: Option<(f64, RobinCoefficient)>,
    /// Finite-difference check of one Jacobian column at every accepted iterate.
    pub check_jacobian: bool,
    pub seed: u64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol_misfit: 1e-10,
            tol_step: 1e-8,
            levenberg_lambda0: 1e-3,
            lambda_decrease: 0.5,
            lambda_increase: 4.0,
            noise_level: 0.0,
            discrepancy_tau: 1.1,
            tikhonov: None,
            check_jacobian: false,
            seed: 0,
        }
    }
}

impl ReconstructionOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidArgument(alloc::format!(
                "{what} is invalid: {v}"
            )))
        };
        if !(self.tol_misfit >= 0.0) {
            return bad("tol_misfit", self.tol_misfit);
        }
        if !(self.tol_step >= 0.0) {
            return bad("tol_step", self.tol_step);
        }
        if !(self.levenberg_lambda0 >= 0.0 && self.levenberg_lambda0.is_finite()) {
            return bad("levenberg_lambda0", self.levenberg_lambda0);
        }
        if !(self.lambda_decrease > 0.0 && self.lambda_decrease < 1.0) {
            return bad("lambda_decrease", self.lambda_decrease);
        }
        if !(self.lambda_increase > 1.0 && self.lambda_increase.is_finite()) {
            return bad("lambda_increase", self.lambda_increase);
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad("noise_level", self.noise_level);
        }
        if !(self.discrepancy_tau >= 1.0 && self.discrepancy_tau.is_finite()) {
            return bad("discrepancy_tau", self.discrepancy_tau);
        }
        if let Some((alpha, _)) = &self.tikhonov {
            if !(*alpha >= 0.0 && alpha.is_finite()) {
                return bad("tikhonov weight", *alpha);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    Misfit,
    Step,
    Discrepancy,
    MaxIters,
    Stalled,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Misfit => "misfit",
            StopReason::Step => "step",
            StopReason::Discrepancy => "discrepancy",
            StopReason::MaxIters => "max_iters",
            StopReason::Stalled => "stalled",
        }
    }
}

/// One accepted iterate (iteration 0 is the initial guess).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub misfit: f64,
    pub residual_norm: f64,
    pub step_norm: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub gamma_hat: RobinCoefficient,
    pub history: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Relative finite-difference errors, one per accepted iterate, when
    /// `check_jacobian` is set.
    pub jacobian_checks: Vec<f64>,
}

impl ReconstructionResult {
    pub fn misfit_history(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.misfit).collect()
    }
}

fn check_data(forward: &Forward, z: &[f64]) -> Result<()> {
    if z.len() != forward.data_len() {
        return Err(Error::DimensionMismatch {
            what: "data z",
            expected: forward.data_len(),
            found: z.len(),
        });
    }
    Ok(())
}

fn half_sq_norm(forward: &Forward, r: &[f64]) -> f64 {
    let n = forward.data_norm(r);
    0.5 * n * n
}

/// `½‖u(γ)|_{Γa} - z‖²` in the data norm of `forward`.
pub fn misfit(forward: &Forward, gamma: &RobinCoefficient, z: &[f64]) -> Result<f64> {
    check_data(forward, z)?;
    let f = forward.with_gamma(gamma.clone())?;
    let u = f.outer_data()?;
    let r: Vec<f64> = u.iter().zip(z).map(|(a, b)| a - b).collect();
    Ok(half_sq_norm(forward, &r))
}

/// Derivative of the stacked outer trace with respect to the nodal values
/// of `γ`, evaluated at the linearization point. Equals `-N` for the
/// Robin outer condition.
pub fn jacobian<E: Executor>(lin: &Linearization, exec: &E) -> Result<DMatrix<f64>> {
    let n = lin.forward().grid().n_theta();
    let cols = exec
        .map(n, |j| lin.sensitivity_data(&unit_direction(n, j)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(columns_to_matrix(lin.forward().data_len(), cols))
}

/// `‖γ1 - γ2‖_{Γi} / ‖γ2‖_{Γi}`.
pub fn relative_error(
    gamma: &RobinCoefficient,
    reference: &RobinCoefficient,
    grid: &AnnulusGrid,
) -> f64 {
    boundary_norm(&gamma.difference(reference), grid) / boundary_norm(&reference.as_trace(), grid)
}

/// Data with additive Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyData {
    pub values: Vec<f64>,
    /// Per-entry standard deviation, `level · rms(z)`.
    pub sigma: f64,
    /// Expected data norm of the noise, `sigma · sqrt(Σ w)`.
    pub delta: f64,
}

/// Adds i.i.d. `N(0, σ²)` noise with `σ = level · rms(z)`, seeded.
pub fn add_noise(forward: &Forward, z: &[f64], level: f64, seed: u64) -> Result<NoisyData> {
    check_data(forward, z)?;
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "noise level {level}"
        )));
    }
    let rms = libm::sqrt(z.iter().map(|v| v * v).sum::<f64>() / z.len().max(1) as f64);
    let sigma = level * rms;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = if sigma > 0.0 {
        let normal =
            Normal::new(0.0, sigma).map_err(|_| Error::InvalidArgument("noise sigma".into()))?;
        z.iter().map(|v| v + normal.sample(&mut rng)).collect()
    } else {
        z.to_vec()
    };
    let wsum: f64 = forward.data_weights().iter().sum();
    Ok(NoisyData {
        values,
        sigma,
        delta: sigma * libm::sqrt(wsum),
    })
}

struct Iterate {
    gamma: RobinCoefficient,
    lin: Linearization,
    residual: Vec<f64>,
    misfit: f64,
}

fn evaluate(
    forward: &Forward,
    gamma: RobinCoefficient,
    z: &[f64],
    opts: &ReconstructionOptions,
) -> Result<Iterate> {
    let lin = forward.with_gamma(gamma.clone())?.linearize()?;
    let u = lin.solution().outer_trace().stacked();
    let residual: Vec<f64> = u.iter().zip(z).map(|(a, b)| a - b).collect();
    let mut misfit = half_sq_norm(forward, &residual);
    if let Some((alpha, reference)) = &opts.tikhonov {
        let d: f64 = gamma
            .values()
            .iter()
            .zip(reference.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        misfit += 0.5 * alpha * d;
    }
    Ok(Iterate {
        gamma,
        lin,
        residual,
        misfit,
    })
}

fn solve_damped(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

fn fd_column_error(forward: &Forward, it: &Iterate, jac: &DMatrix<f64>, j: usize) -> Result<f64> {
    let eps = 1e-6;
    let mut v = it.gamma.values().to_vec();
    let step = if v[j] + eps <= it.gamma.gamma_hi() {
        eps
    } else {
        -eps
    };
    v[j] += step;
    let gp = RobinCoefficient::new(v, it.gamma.gamma_lo(), it.gamma.gamma_hi())?;
    let up = forward.with_gamma(gp)?.outer_data()?;
    let u0 = it.lin.solution().outer_trace().stacked();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..up.len() {
        let fd = (up[i] - u0[i]) / step;
        num = num.max((fd - jac[(i, j)]).abs());
        den = den.max(jac[(i, j)].abs());
    }
    Ok(if den > 0.0 { num / den } else { num })
}

/// Projected Levenberg–Marquardt on `½‖u(γ)|_{Γa} - z‖²` over the box of
/// `gamma0`. Jacobian columns are computed through `exec`; every other step
/// is sequential, so results do not depend on the executor.
pub fn reconstruct<E: Executor>(
    forward: &Forward,
    z: &[f64],
    gamma0: &RobinCoefficient,
    opts: &ReconstructionOptions,
    exec: &E,
) -> Result<ReconstructionResult> {
    opts.validate()?;
    check_data(forward, z)?;
    let grid = forward.grid().clone();
    gamma0.check(&grid)?;
    // re-check feasibility explicitly: K is the box carried by gamma0
    let gamma0 = RobinCoefficient::new(
        gamma0.values().to_vec(),
        gamma0.gamma_lo(),
        gamma0.gamma_hi(),
    )?;
    let (lo, hi) = (gamma0.gamma_lo(), gamma0.gamma_hi());
    let weights: Vec<f64> = forward.data_weights().into_iter().map(libm::sqrt).collect();
    let threshold = opts.discrepancy_tau * opts.noise_level;

    let mut it = evaluate(forward, gamma0, z, opts)?;
    let mut lambda = opts.levenberg_lambda0;
    let mut history = alloc::vec![IterationRecord {
        iteration: 0,
        misfit: it.misfit,
        residual_norm: forward.data_norm(&it.residual),
        step_norm: 0.0,
        lambda,
    }];
    let mut jacobian_checks = Vec::new();
    if it.misfit <= opts.tol_misfit {
        return finish(it, history, jacobian_checks, StopReason::Misfit);
    }
    if opts.noise_level > 0.0 && forward.data_norm(&it.residual) <= threshold {
        return finish(it, history, jacobian_checks, StopReason::Discrepancy);
    }

    for iteration in 1..=opts.max_iters {
        let jac = jacobian(&it.lin, exec)?;
        if opts.check_jacobian {
            let j = iteration % grid.n_theta();
            jacobian_checks.push(fd_column_error(forward, &it, &jac, j)?);
        }
        let mut jw = jac;
        for (i, &w) in weights.iter().enumerate() {
            jw.row_mut(i).scale_mut(w);
        }
        let rw = DVector::from_iterator(
            weights.len(),
            it.residual.iter().zip(&weights).map(|(r, w)| r * w),
        );
        let mut normal = jw.transpose() * &jw;
        let mut grad = jw.transpose() * rw;
        if let Some((alpha, reference)) = &opts.tikhonov {
            for k in 0..grid.n_theta() {
                normal[(k, k)] += alpha;
                grad[k] += alpha * (it.gamma.values()[k] - reference.values()[k]);
            }
        }

        let accepted = loop {
            let mut damped = normal.clone();
            for k in 0..grid.n_theta() {
                damped[(k, k)] += lambda;
            }
            let delta = solve_damped(&damped, &(-&grad));
            let trial = match delta {
                Some(d) => {
                    let v = it
                        .gamma
                        .values()
                        .iter()
                        .zip(d.iter())
                        .map(|(g, d)| g + d)
                        .collect();
                    let g = RobinCoefficient::projected(v, lo, hi)?;
                    Some(evaluate(forward, g, z, opts)?)
                }
                None => None,
            };
            match trial {
                Some(t) if t.misfit < it.misfit => {
                    lambda *= opts.lambda_decrease;
                    break t;
                }
                _ => {
                    lambda *= opts.lambda_increase;
                    if lambda > LAMBDA_MAX {
                        return finish(it, history, jacobian_checks, StopReason::Stalled);
                    }
                }
            }
        };

        let step = boundary_norm(&accepted.gamma.difference(&it.gamma), &grid);
        let size = boundary_norm(
            &BoundaryTrace::new(Boundary::Inner, it.gamma.values().to_vec()),
            &grid,
        );
        it = accepted;
        let residual_norm = forward.data_norm(&it.residual);
        history.push(IterationRecord {
            iteration,
            misfit: it.misfit,
            residual_norm,
            step_norm: step,
            lambda,
        });
        if it.misfit <= opts.tol_misfit {
            return finish(it, history, jacobian_checks, StopReason::Misfit);
        }
        if opts.noise_level > 0.0 && residual_norm <= threshold {
            return finish(it, history, jacobian_checks, StopReason::Discrepancy);
        }
        if step <= opts.tol_step * (1.0 + size) {
            return finish(it, history, jacobian_checks, StopReason::Step);
        }
    }
    finish(it, history, jacobian_checks, StopReason::MaxIters)
}

fn finish(
    it: Iterate,
    history: Vec<IterationRecord>,
    jacobian_checks: Vec<f64>,
    stop_reason: StopReason,
) -> Result<ReconstructionResult> {
    Ok(ReconstructionResult {
        gamma_hat: it.gamma,
        iterations: history.len() - 1,
        history,
        converged: matches!(
            stop_reason,
            StopReason::Misfit | StopReason::Step | StopReason::Discrepancy
        ),
        stop_reason,
        jacobian_checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{EllipticProblem, OuterBc};
    use crate::exec::Sequential;

    fn forward(n_r: usize, n_theta: usize, gamma: f64) -> Forward {
        let grid = AnnulusGrid::new(1.0, 2.0, n_r, n_theta).unwrap();
        let g = RobinCoefficient::constant(n_theta, gamma, 0.5, 3.0).unwrap();
        Forward::Elliptic(
            EllipticProblem::radial_manufactured(grid, g, 2.0, -1.0, OuterBc::Robin1).unwrap(),
        )
    }

    #[test]
    fn misfit_zero_at_truth_and_quadratic() {
        let f = forward(17, 8, 1.5);
        let z = f.outer_data().unwrap();
        assert_eq!(misfit(&f, f.gamma(), &z).unwrap(), 0.0);
        let zero = alloc::vec![0.0; 8];
        let m0 = misfit(&f, f.gamma(), &zero).unwrap();
        let c = z[0];
        let expect = 0.5 * c * c * 2.0 * core::f64::consts::PI * 2.0;
        assert!((m0 - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn starting_at_truth_stops_immediately() {
        let f = forward(17, 8, 1.5);
        let z = f.outer_data().unwrap();
        let r = reconstruct(
            &f,
            &z,
            f.gamma(),
            &ReconstructionOptions::default(),
            &Sequential,
        )
        .unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.stop_reason, StopReason::Misfit);
    }

    #[test]
    fn small_inverse_crime() {
        let f = forward(17, 8, 1.5);
        let z = f.outer_data().unwrap();
        let g0 = RobinCoefficient::constant(8, 1.0, 0.5, 3.0).unwrap();
        let opts = ReconstructionOptions {
            check_jacobian: true,
            ..Default::default()
        };
        let r = reconstruct(&f, &z, &g0, &opts, &Sequential).unwrap();
        assert!(r.converged, "{:?}", r.stop_reason);
        assert!(relative_error(&r.gamma_hat, f.gamma(), f.grid()) < 1e-6);
        let h = r.misfit_history();
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
        assert!(
            r.jacobian_checks.iter().all(|&e| e < 1e-4),
            "{:?}",
            r.jacobian_checks
        );
    }

    #[test]
    fn noise_is_seeded() {
        let f = forward(9, 8, 1.5);
        let z = f.outer_data().unwrap();
        let a = add_noise(&f, &z, 0.01, 7).unwrap();
        let b = add_noise(&f, &z, 0.01, 7).unwrap();
        let c = add_noise(&f, &z, 0.01, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert_eq!(add_noise(&f, &z, 0.0, 7).unwrap().values, z);
    }
}
