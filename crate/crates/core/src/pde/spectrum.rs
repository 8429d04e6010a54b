use std::f64::consts::PI;

use super::tridiag::apply_laplacian;
use crate::domain::SpatialGrid;
use crate::error::{Error, Result};

/// Leading eigenpairs of the discrete negative Dirichlet Laplacian.
///
/// On a uniform grid the eigenvectors are sampled sines,
/// `e_i(x) = sqrt(2 / ell) sin(i pi x / ell)`, which are orthonormal in the
/// discrete inner product, and `lambda_i = (4 / h^2) sin^2(i pi h / (2 ell))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
}

impl DirichletSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `‖A e_i - lambda_i e_i‖` for the zero-based pair `i`.
    pub fn residual(&self, g: &SpatialGrid, i: usize) -> f64 {
        let e = &self.eigenvectors[i];
        let ae = apply_laplacian(g, e);
        let diff: Vec<f64> = ae
            .iter()
            .zip(e)
            .map(|(a, v)| a - self.eigenvalues[i] * v)
            .collect();
        g.norm_unchecked(&diff)
    }
}

/// Eigenvalue of mode `i` (one based).
pub fn dirichlet_eigenvalue(g: &SpatialGrid, i: usize) -> f64 {
    let s = (i as f64 * PI * g.h() / (2.0 * g.ell())).sin();
    4.0 * s * s / (g.h() * g.h())
}

/// The smallest eigenvalue `lambda_{1,h}`.
pub fn first_eigenvalue(g: &SpatialGrid) -> f64 {
    dirichlet_eigenvalue(g, 1)
}

/// Normalized eigenvector of mode `i` (one based); mode 1 is nonnegative.
pub fn dirichlet_eigenvector(g: &SpatialGrid, i: usize) -> Vec<f64> {
    let scale = (2.0 / g.ell()).sqrt();
    let k = i as f64 * PI / g.ell();
    (0..g.n()).map(|j| scale * (k * g.node(j)).sin()).collect()
}

/// The first `k` eigenpairs in increasing order.
pub fn dirichlet_eigs(g: &SpatialGrid, k: usize) -> Result<DirichletSpectrum> {
    if k > g.n() {
        return Err(Error::Dimension {
            expected: g.n(),
            got: k,
        });
    }
    Ok(DirichletSpectrum {
        eigenvalues: (1..=k).map(|i| dirichlet_eigenvalue(g, i)).collect(),
        eigenvectors: (1..=k).map(|i| dirichlet_eigenvector(g, i)).collect(),
    })
}

/// `sum_i c_i e_i` for one-based `(mode, coefficient)` pairs.
pub fn eigenmode_combination(g: &SpatialGrid, modes: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut y = vec![0.0; g.n()];
    for &(mode, c) in modes {
        if mode == 0 || mode > g.n() {
            return Err(Error::Argument(format!(
                "mode index {mode} outside 1..={}",
                g.n()
            )));
        }
        for (yi, ei) in y.iter_mut().zip(dirichlet_eigenvector(g, mode)) {
            *yi += c * ei;
        }
    }
    Ok(y)
}
