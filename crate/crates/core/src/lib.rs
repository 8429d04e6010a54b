//! Minimal-time and minimal-norm control of the one-dimensional semilinear
//! heat equation `y_t - y_xx + f(y) = chi_omega u` with homogeneous Dirichlet
//! data, steering the state into a closed L² ball.
//!
//! Layers, bottom up:
//! - [`domain`]: grids, controls, trajectories, and hypothesis validators;
//! - [`pde`]: IMEX forward solver, exact discrete adjoint, spectral helpers;
//! - [`reach`]: reachability oracle (projected gradient on the terminal norm);
//! - [`solvers`]: value functions by bisection, bang-bang extraction,
//!   equivalence round trips and curve sweeps;
//! - [`oracle`]: closed-form scalar instance and brute-force Galerkin search;
//! - [`cli`]: configuration, experiment runner and file export.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod exec;
pub mod pde;

pub use domain::{
    l2_norm, validate_h1, validate_h2, ControlSignal, H1Report, Nonlinearity, NonlinearityKind,
    NonlinearitySpec, SpatialGrid, StateTrajectory, TargetBall,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub mod bangbang;
pub mod problem;
pub mod reach;

pub use problem::ControlProblem;
pub mod cli;
pub mod oracle;
pub mod solvers;
