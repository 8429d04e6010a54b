//! Forward and adjoint solvers for the semilinear heat equation on a 1D grid.

mod checks;
mod solve;
mod spectrum;
pub(crate) mod tridiag;

pub use checks::{
    apriori_bound_check, decay_envelope_check, hitting_time, scaling_gap_check, AprioriReport,
    DecayReport, ScalingReport,
};
pub use solve::{solve_adjoint, solve_forward, solve_tangent, AdjointTrajectory};
pub use spectrum::{
    dirichlet_eigenvalue, dirichlet_eigenvector, dirichlet_eigs, eigenmode_combination,
    first_eigenvalue, DirichletSpectrum,
};
