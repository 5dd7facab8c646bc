#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use robin_core::elliptic::{
    homogeneous_outer_harmonic, surjectivity_direction_elliptic, EllipticProblem, OuterBc,
};
use robin_core::linop::{
    assemble_n_matrix, conditioning_report, solve_n, solve_n_radial, Forward, Linearization,
};
use robin_core::{AnnulusGrid, Boundary, BoundaryTrace, RobinCoefficient, Sequential};

const R1: f64 = 1.0;
const R2: f64 = 2.0;
const GAMMA: f64 = 1.5;

// u* = 2 - ln r: nonzero on the inner circle, radial
fn linearize(n_r: usize, n_theta: usize) -> Linearization {
    let grid = AnnulusGrid::new(R1, R2, n_r, n_theta).unwrap();
    let gamma = RobinCoefficient::constant(n_theta, GAMMA, 0.5, 3.0).unwrap();
    let p = EllipticProblem::radial_manufactured(grid, gamma, 2.0, -1.0, OuterBc::Robin1).unwrap();
    Forward::Elliptic(p).linearize().unwrap()
}

/// Outer trace of the sensitivity for the inner perturbation `cos(kθ)`,
/// exact in r: `w = a r^μ + b r^-μ` (or `a + b ln r` for k = 0) with
/// `-w'(r1) + γ w(r1) = -u*(r1)` and `w'(r2) + w(r2) = 0`. `μ` is the
/// wavenumber seen by the angular second difference on `n_theta` nodes.
fn mode_trace_oracle(k: u32, n_theta: usize, u_star_r1: f64) -> f64 {
    let h = 2.0 * std::f64::consts::PI / n_theta as f64;
    let mu = 2.0 * (0.5 * k as f64 * h).sin() / h;
    let (p1, dp1, p2, dp2, q1, dq1, q2, dq2) = if k == 0 {
        (1.0, 0.0, 1.0, 0.0, R1.ln(), 1.0 / R1, R2.ln(), 1.0 / R2)
    } else {
        let k = mu;
        (
            R1.powf(k),
            k * R1.powf(k - 1.0),
            R2.powf(k),
            k * R2.powf(k - 1.0),
            R1.powf(-k),
            -k * R1.powf(-k - 1.0),
            R2.powf(-k),
            -k * R2.powf(-k - 1.0),
        )
    };
    // rows: inner Robin, outer Robin
    let (a11, a12, b1) = (-dp1 + GAMMA * p1, -dq1 + GAMMA * q1, -u_star_r1);
    let (a21, a22, b2) = (dp2 + p2, dq2 + q2, 0.0);
    let det = a11 * a22 - a12 * a21;
    let a = (b1 * a22 - a12 * b2) / det;
    let b = (a11 * b2 - a21 * b1) / det;
    a * p2 + b * q2
}

#[test]
fn homogeneous_construction_gives_minus_one_over_r2() {
    let lin = linearize(129, 64);
    let d = surjectivity_direction_elliptic(R1, R2, GAMMA, 2.0).unwrap();
    let n = lin
        .apply_n(&BoundaryTrace::constant(Boundary::Inner, 64, d))
        .unwrap()
        .stacked();
    let target = -1.0 / R2;
    for v in n {
        assert!(((v - target) / target).abs() < 0.02, "{v}");
    }
    // the construction's w indeed satisfies the homogeneous outer condition
    let (c1, c2) = homogeneous_outer_harmonic(R2);
    assert!((c2 / R2 + c1 + c2 * R2.ln()).abs() < 1e-15);
}

#[test]
fn mode_responses_match_harmonic_oracle_and_decay() {
    let lin = linearize(129, 32);
    let map = assemble_n_matrix(&lin, &Sequential).unwrap();
    let report = conditioning_report(&map);
    let modes = report.mode_responses.expect("radial coefficient");
    for k in 0..6u32 {
        let exact = mode_trace_oracle(k, 32, 2.0).abs();
        let rel = (modes[k as usize] - exact).abs() / exact;
        assert!(rel < 0.02, "mode {k}: {} vs {exact}", modes[k as usize]);
    }
    for w in modes.windows(2) {
        assert!(w[1] < w[0], "{modes:?}");
    }
    assert!(report.sigma_min > 0.0);
    assert!(modes[0] > 0.0);
}

#[test]
fn solve_n_inverts_on_constants() {
    let lin = linearize(33, 16);
    let map = assemble_n_matrix(&lin, &Sequential).unwrap();
    let d_true = BoundaryTrace::constant(Boundary::Inner, 16, 0.37);
    let phi = lin.apply_n(&d_true).unwrap().stacked();
    for d in [
        solve_n(&map, &phi, 0.0).unwrap(),
        solve_n_radial(&map, &phi).unwrap(),
    ] {
        for v in d.values {
            assert!((v - 0.37).abs() <= 1e-6 * 0.37, "{v}");
        }
    }
}

#[test]
fn zero_inner_solution_gives_zero_map() {
    let grid = AnnulusGrid::new(R1, R2, 17, 8).unwrap();
    let gamma = RobinCoefficient::constant(8, GAMMA, 0.5, 3.0).unwrap();
    let p = EllipticProblem::radial_manufactured(grid, gamma, 0.0, 0.0, OuterBc::Robin1).unwrap();
    let lin = Forward::Elliptic(p).linearize().unwrap();
    let map = assemble_n_matrix(&lin, &Sequential).unwrap();
    assert!(map.matrix.iter().all(|&v| v == 0.0));
}

fn trace_strategy(n: usize) -> impl Strategy<Value = BoundaryTrace> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(|v| BoundaryTrace::new(Boundary::Inner, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_in_direction(d1 in trace_strategy(8), d2 in trace_strategy(8), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let lin = linearize(17, 8);
        let mix = BoundaryTrace::new(
            Boundary::Inner,
            d1.values.iter().zip(&d2.values).map(|(x, y)| a * x + b * y).collect(),
        );
        let n1 = lin.apply_n(&d1).unwrap().stacked();
        let n2 = lin.apply_n(&d2).unwrap().stacked();
        let nm = lin.apply_n(&mix).unwrap().stacked();
        for i in 0..8 {
            let lin_comb = a * n1[i] + b * n2[i];
            prop_assert!((nm[i] - lin_comb).abs() <= 1e-9 * (1.0 + lin_comb.abs()));
        }
    }

    #[test]
    fn rotation_equivariant(d in trace_strategy(8), k in 0usize..8) {
        let lin = linearize(17, 8);
        let n = lin.apply_n(&d).unwrap().stacked();
        let nr = lin.apply_n(&d.rotated(k)).unwrap().stacked();
        let rotated = BoundaryTrace::new(Boundary::Outer, n).rotated(k);
        for i in 0..8 {
            prop_assert!((nr[i] - rotated.values[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn matrix_matches_apply(d in trace_strategy(8)) {
        let lin = linearize(17, 8);
        let map = assemble_n_matrix(&lin, &Sequential).unwrap();
        let a = map.apply(&d);
        let b = lin.apply_n(&d).unwrap().stacked();
        let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        prop_assert!(num <= 1e-8 * den.max(1e-300));
    }
}
