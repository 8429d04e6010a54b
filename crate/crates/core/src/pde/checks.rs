//! Hitting times and the a-priori estimates a trajectory must respect.

use serde::Serialize;

use super::spectrum::first_eigenvalue;
use crate::domain::{SpatialGrid, StateTrajectory, TargetBall};
use crate::error::{Error, Result};

/// First time the norm trajectory enters the closed ball, with linear
/// interpolation of the norm between the bracketing steps. `None` when the
/// ball is not reached on the horizon.
pub fn hitting_time(y: &StateTrajectory, ball: &TargetBall) -> Option<f64> {
    let r = ball.radius();
    let norms = y.norms();
    let k = norms.iter().position(|&v| v <= r)?;
    if k == 0 {
        return Some(0.0);
    }
    let (above, below) = (norms[k - 1], norms[k]);
    let frac = if above > below {
        (above - r) / (above - below)
    } else {
        1.0
    };
    Some(y.time(k - 1) + frac * y.dt())
}

/// Comparison of an uncontrolled trajectory with `e^{-lambda_1 t} ‖y0‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub lambda1: f64,
    pub initial_norm: f64,
    /// `max_k (‖y(t_k)‖ - e^{-lambda_1 t_k} ‖y0‖)`.
    pub max_excess: f64,
    /// `max_k |‖y(t_k)‖ / (e^{-lambda_1 t_k} ‖y0‖) - 1|`; zero for `y0 = 0`.
    pub max_relative_gap: f64,
    pub tolerance: f64,
    pub passes: bool,
}

pub fn decay_envelope_check(y: &StateTrajectory, g: &SpatialGrid, tol: f64) -> DecayReport {
    let lambda1 = first_eigenvalue(g);
    let y0 = y.norms()[0];
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_relative_gap = 0.0_f64;
    for (k, &norm) in y.norms().iter().enumerate() {
        let envelope = (-lambda1 * y.time(k)).exp() * y0;
        max_excess = max_excess.max(norm - envelope);
        if envelope > 0.0 {
            max_relative_gap = max_relative_gap.max((norm / envelope - 1.0).abs());
        }
    }
    DecayReport {
        lambda1,
        initial_norm: y0,
        max_excess,
        max_relative_gap,
        tolerance: tol,
        passes: max_excess <= tol * y0,
    }
}

/// Energy estimate for a trajectory driven by a control bounded by `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    pub sup_norm: f64,
    /// `(M^2 T / 2 + ‖y0‖^2)^{1/2} e^T`.
    pub bound: f64,
    pub slack: f64,
    pub passes: bool,
    /// The same estimate with `M` in place of `M^2`.
    pub literal_bound: f64,
    pub literal_holds: bool,
}

pub fn apriori_bound_check(y: &StateTrajectory, m: f64, horizon: f64) -> AprioriReport {
    let y0 = y.norms()[0];
    let sup_norm = y.norms().iter().copied().fold(0.0, f64::max);
    let growth = horizon.exp();
    let bound = (0.5 * m * m * horizon + y0 * y0).sqrt() * growth;
    let literal_bound = (0.5 * m * horizon + y0 * y0).sqrt() * growth;
    AprioriReport {
        sup_norm,
        bound,
        slack: bound - sup_norm,
        passes: sup_norm <= bound,
        literal_bound,
        literal_holds: sup_norm <= literal_bound,
    }
}

/// Gap between trajectories driven by `u` and `theta u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub theta: f64,
    pub sup_gap: f64,
    /// `(1 - theta) M sqrt(T) e^{(2L + 1) T / 2}`.
    pub bound: f64,
    pub passes: bool,
}

pub fn scaling_gap_check(
    full: &StateTrajectory,
    scaled: &StateTrajectory,
    theta: f64,
    m: f64,
    lipschitz: f64,
    g: &SpatialGrid,
) -> Result<ScalingReport> {
    if full.nt() != scaled.nt() || full.n() != scaled.n() {
        return Err(Error::Dimension {
            expected: full.nt(),
            got: scaled.nt(),
        });
    }
    let horizon = full.horizon();
    let sup_gap = full
        .states()
        .zip(scaled.states())
        .map(|(a, b)| {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            g.norm_unchecked(&d)
        })
        .fold(0.0, f64::max);
    let bound =
        (1.0 - theta) * m * horizon.sqrt() * ((2.0 * lipschitz + 1.0) * horizon / 2.0).exp();
    Ok(ScalingReport {
        theta,
        sup_gap,
        bound,
        passes: sup_gap <= bound,
    })
}
