//! Forward, sensitivity and inverse solvers for identifying a Robin
//! coefficient on the inner circle of an annulus from measurements on the
//! outer circle, for a stationary (Laplace) and a time-dependent
//! (`∂_t u - |x|² Δu = 0`) model.
//!
//! The crate is `no_std` + `alloc`. IO, configuration and threading live in
//! the `robin` companion crate; concurrency is injected through
//! [`exec::Executor`].

#![no_std]
// `!(x <= tol)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod band;
pub mod coefficient;
pub mod elliptic;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod inverse;
pub mod linop;
pub mod parabolic;
pub mod stability;

pub use coefficient::RobinCoefficient;
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use geometry::{boundary_norm, field_norm_l2, AnnulusGrid, Boundary, BoundaryTrace, Field};
