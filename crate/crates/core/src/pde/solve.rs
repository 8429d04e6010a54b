//! Time stepping for the controlled state equation and its discrete adjoint.
//!
//! One step of the IMEX scheme reads
//!
//! ```text
//! (I + dt A) y_{k+1} = y_k - dt f(y_k) + dt chi_omega u_k
//! ```
//!
//! The adjoint is the exact transpose of this map linearized about a stored
//! forward trajectory, so `<dy_N, xi> = <dy_0, psi_0> + sum_k dt <chi du_k, p_k>`
//! holds to rounding error.

use super::tridiag::ImplicitDiffusion;
use crate::domain::{ControlSignal, Nonlinearity, NonlinearitySpec, SpatialGrid, StateTrajectory};
use crate::error::{check_len, Error, Result};

/// Backward-in-time costates produced by [`solve_adjoint`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    dt: f64,
    nt: usize,
    n: usize,
    /// `psi_k`, `k = 0..=nt`, with `psi_nt = xi`.
    costates: Vec<f64>,
    /// `p_k = (I + dt A)^{-1} psi_{k+1}`, `k = 0..nt`: the costate paired with
    /// the control acting on step `k`.
    step_costates: Vec<f64>,
}

impl AdjointTrajectory {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn costate(&self, k: usize) -> &[f64] {
        &self.costates[k * self.n..(k + 1) * self.n]
    }

    pub fn terminal(&self) -> &[f64] {
        self.costate(self.nt)
    }

    /// Costate seen by the control on step `k`; the gradient of
    /// `<y_N, xi>` with respect to `u_k` is `chi_omega * p_k`.
    pub fn step_costate(&self, k: usize) -> &[f64] {
        &self.step_costates[k * self.n..(k + 1) * self.n]
    }

    pub fn step_costates(&self) -> std::slice::ChunksExact<'_, f64> {
        self.step_costates.chunks_exact(self.n.max(1))
    }
}

fn check_control(u: &ControlSignal, g: &SpatialGrid) -> Result<()> {
    if u.n() != g.n() {
        return Err(Error::Dimension {
            expected: g.n(),
            got: u.n(),
        });
    }
    if !(u.dt().is_finite() && u.dt() > 0.0) {
        return Err(Error::Argument(format!(
            "time step must be positive, got {}",
            u.dt()
        )));
    }
    Ok(())
}

/// Runs the IMEX scheme from `y0` under control `u` over `u.nt()` steps.
pub fn solve_forward(
    y0: &[f64],
    u: &ControlSignal,
    f: &NonlinearitySpec,
    g: &SpatialGrid,
) -> Result<StateTrajectory> {
    check_len(y0, g.n())?;
    check_control(u, g)?;
    let (n, nt, dt) = (g.n(), u.nt(), u.dt());
    let op = ImplicitDiffusion::new(g, dt);
    let linear = f.is_zero();

    let mut data = vec![0.0; (nt + 1) * n];
    data[..n].copy_from_slice(y0);
    for k in 0..nt {
        let (done, rest) = data.split_at_mut((k + 1) * n);
        let prev = &done[k * n..];
        let next = &mut rest[..n];
        let uk = u.step(k);
        if linear {
            for i in 0..n {
                next[i] = prev[i] + dt * uk[i];
            }
        } else {
            for i in 0..n {
                next[i] = prev[i] - dt * f.value(prev[i]) + dt * uk[i];
            }
        }
        op.solve_in_place(next);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step: k + 1 });
        }
    }
    Ok(StateTrajectory::from_raw(g, dt, nt, data))
}

/// Linearization of [`solve_forward`] about `y`: returns `dy_k`, `k = 0..=nt`,
/// driven by an initial perturbation and a control perturbation.
pub fn solve_tangent(
    y: &StateTrajectory,
    dy0: &[f64],
    du: &ControlSignal,
    f: &NonlinearitySpec,
    g: &SpatialGrid,
) -> Result<Vec<Vec<f64>>> {
    check_len(dy0, g.n())?;
    check_control(du, g)?;
    if du.nt() != y.nt() {
        return Err(Error::Dimension {
            expected: y.nt(),
            got: du.nt(),
        });
    }
    let dt = y.dt();
    let op = ImplicitDiffusion::new(g, dt);
    let mut out = Vec::with_capacity(y.nt() + 1);
    out.push(dy0.to_vec());
    for k in 0..y.nt() {
        let yk = y.state(k);
        let prev = &out[k];
        let mut next: Vec<f64> = (0..g.n())
            .map(|i| (1.0 - dt * f.derivative(yk[i])) * prev[i] + dt * du.step(k)[i])
            .collect();
        op.solve_in_place(&mut next);
        out.push(next);
    }
    Ok(out)
}

/// Exact discrete adjoint of the forward scheme linearized about `y`, with
/// terminal datum `xi`.
///
/// Runs `psi_nt = xi`, `p_k = (I + dt A)^{-1} psi_{k+1}`,
/// `psi_k = (I - dt f'(y_k)) p_k` for `k = nt-1, ..., 0`.
pub fn solve_adjoint(
    y: &StateTrajectory,
    xi: &[f64],
    f: &NonlinearitySpec,
    g: &SpatialGrid,
) -> Result<AdjointTrajectory> {
    check_len(xi, g.n())?;
    if y.n() != g.n() {
        return Err(Error::Dimension {
            expected: g.n(),
            got: y.n(),
        });
    }
    let (n, nt, dt) = (g.n(), y.nt(), y.dt());
    let op = ImplicitDiffusion::new(g, dt);
    let linear = f.is_zero();

    let mut costates = vec![0.0; (nt + 1) * n];
    let mut step_costates = vec![0.0; nt * n];
    costates[nt * n..].copy_from_slice(xi);
    for k in (0..nt).rev() {
        let p = &mut step_costates[k * n..(k + 1) * n];
        p.copy_from_slice(&costates[(k + 1) * n..(k + 2) * n]);
        op.solve_in_place(p);
        let psi = &mut costates[k * n..(k + 1) * n];
        if linear {
            psi.copy_from_slice(p);
        } else {
            let yk = y.state(k);
            for i in 0..n {
                psi[i] = (1.0 - dt * f.derivative(yk[i])) * p[i];
            }
        }
    }
    Ok(AdjointTrajectory {
        dt,
        nt,
        n,
        costates,
        step_costates,
    })
}
