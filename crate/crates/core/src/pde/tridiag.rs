//! Constant-coefficient tridiagonal factorization for the implicit diffusion
//! step `(I + dt A) y = rhs`, where `A = tridiag(-1, 2, -1) / h^2` is the
//! discrete Dirichlet Laplacian (with sign flipped).

use crate::domain::SpatialGrid;

/// Precomputed Thomas sweep for `I + dt A`. The matrix is symmetric, so the
/// same factorization serves the adjoint.
#[derive(Debug, Clone)]
pub(crate) struct ImplicitDiffusion {
    off: f64,
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ImplicitDiffusion {
    pub(crate) fn new(g: &SpatialGrid, dt: f64) -> Self {
        let n = g.n();
        let r = dt / (g.h() * g.h());
        let diag = 1.0 + 2.0 * r;
        let off = -r;
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let pivot = diag - off * prev_upper;
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = off * inv_pivot[i];
            prev_upper = upper[i];
        }
        Self {
            off,
            upper,
            inv_pivot,
        }
    }

    /// Overwrites `rhs` with `(I + dt A)^{-1} rhs`.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        if n == 0 {
            return;
        }
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

/// `A v` for the discrete negative Dirichlet Laplacian.
pub(crate) fn apply_laplacian(g: &SpatialGrid, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let inv_h2 = 1.0 / (g.h() * g.h());
    (0..n)
        .map(|i| {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            (2.0 * v[i] - left - right) * inv_h2
        })
        .collect()
}
