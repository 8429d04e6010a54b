//! Bang-bang controls from the maximum condition.

use crate::domain::{ControlSignal, SpatialGrid};
use crate::error::{Error, Result};
use crate::pde::AdjointTrajectory;

/// Below this costate norm the masked adjoint is treated as vanishing.
pub const DEGENERATE_COSTATE: f64 = 1e-14;

/// Maximizer of `<chi_omega psi(t_k), v>` over `‖v‖ <= M` at every step:
/// `u_k = M chi_omega p_k / ‖chi_omega p_k‖`.
pub fn extract_bangbang(psi: &AdjointTrajectory, m: f64, g: &SpatialGrid) -> Result<ControlSignal> {
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::Argument(format!(
            "control bound must be nonnegative, got {m}"
        )));
    }
    let nt = psi.nt();
    let mut data = Vec::with_capacity(nt * g.n());
    if m == 0.0 {
        data.resize(nt * g.n(), 0.0);
        return Ok(ControlSignal::from_raw(psi.dt(), nt, g.n(), data));
    }
    for (k, p) in psi.step_costates().enumerate() {
        let start = data.len();
        data.extend(p.iter().zip(g.mask()).map(|(v, w)| v * w));
        let norm = g.norm_unchecked(&data[start..]);
        if !(norm >= DEGENERATE_COSTATE) {
            return Err(Error::DegenerateCostate { step: k, norm });
        }
        let scale = m / norm;
        data[start..].iter_mut().for_each(|v| *v *= scale);
    }
    Ok(ControlSignal::from_raw(psi.dt(), nt, g.n(), data))
}

/// Fraction of steps whose pointwise norm lies in
/// `[(1 - delta) level, (1 + delta) level]`.
pub fn bangbang_report(v: &ControlSignal, level: f64, delta: f64, g: &SpatialGrid) -> Result<f64> {
    if !(level > 0.0) {
        return Err(Error::Argument(format!(
            "bang-bang level must be positive, got {level}"
        )));
    }
    if v.nt() == 0 {
        return Ok(0.0);
    }
    let (lo, hi) = ((1.0 - delta) * level, (1.0 + delta) * level);
    let hits = v
        .pointwise_norms(g)
        .into_iter()
        .filter(|&norm| lo <= norm && norm <= hi)
        .count();
    Ok(hits as f64 / v.nt() as f64)
}
