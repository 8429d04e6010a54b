//! Independent ground truth for the value functions.
//!
//! The scalar oracle covers the linear, global-control, single-eigenmode
//! case, where the state stays on `e_1` and the problem reduces to
//! `a' = -lambda a + u`, `|u| <= M`, with the closed forms below. The
//! Galerkin oracle brute-forces a tiny control family on a few-mode
//! projection for everything else.

use serde::Serialize;

use crate::domain::{dot, Nonlinearity};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pde::dirichlet_eigs;
use crate::problem::ControlProblem;

/// One-mode reduction: amplitude `a0` on `e_1`, target radius `r`, decay
/// rate `lam`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarInstance {
    pub a0: f64,
    pub r: f64,
    pub lam: f64,
}

impl ScalarInstance {
    pub fn new(a0: f64, r: f64, lam: f64) -> Result<Self> {
        if !(r > 0.0 && a0 > r && lam > 0.0 && a0.is_finite() && lam.is_finite()) {
            return Err(Error::Argument(format!(
                "scalar instance needs a0 > r > 0 and lam > 0, got a0 = {a0}, r = {r}, lam = {lam}"
            )));
        }
        Ok(Self { a0, r, lam })
    }

    /// Scalar instance matching `problem` when it is linear, fully controlled
    /// and starts on a positive multiple of `e_1`.
    pub fn from_problem(problem: &ControlProblem) -> Result<Self> {
        let g = problem.grid();
        if !problem.nonlinearity().is_zero() || !g.is_global_control() {
            return Err(Error::Argument(
                "scalar oracle needs f = 0 and control on the whole domain".into(),
            ));
        }
        let spectrum = dirichlet_eigs(g, 1)?;
        let e1 = &spectrum.eigenvectors()[0];
        let a0 = g.inner(problem.y0(), e1)?;
        let residual: Vec<f64> = problem
            .y0()
            .iter()
            .zip(e1)
            .map(|(y, e)| y - a0 * e)
            .collect();
        if g.norm_unchecked(&residual) > 1e-12 * problem.y0_norm() || a0 <= 0.0 {
            return Err(Error::Argument(
                "scalar oracle needs y0 to be a positive multiple of e_1".into(),
            ));
        }
        Self::new(a0, problem.radius(), problem.lambda1())
    }

    /// Free-decay hitting time `ln(a0 / r) / lam`.
    pub fn gamma(&self) -> f64 {
        (self.a0 / self.r).ln() / self.lam
    }
}

/// Minimal time for `a' = -lam a + u`, `|u| <= M`, to go from `a0` to `r`:
/// `ln((a0 + M / lam) / (r + M / lam)) / lam`. NaN for negative `M`.
pub fn scalar_tau(inst: &ScalarInstance, m: f64) -> f64 {
    if !(m >= 0.0) {
        return f64::NAN;
    }
    let shift = m / inst.lam;
    ((inst.a0 + shift) / (inst.r + shift)).ln() / inst.lam
}

/// Minimal bound reaching `r` exactly at `T`:
/// `lam (a0 e^{-lam T} - r) / (1 - e^{-lam T})`, for `0 < T <= gamma`.
pub fn scalar_alpha(inst: &ScalarInstance, horizon: f64) -> Result<f64> {
    let gamma = inst.gamma();
    if !(horizon > 0.0 && horizon <= gamma * (1.0 + 1e-12)) {
        return Err(Error::Argument(format!(
            "horizon {horizon} outside (0, {gamma}]"
        )));
    }
    let decay = (-inst.lam * horizon).exp();
    Ok((inst.lam * (inst.a0 * decay - inst.r) / (1.0 - decay)).max(0.0))
}

/// Finite search space for [`galerkin_bruteforce_alpha`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinSearch {
    /// Number of leading eigenmodes kept, at most 3.
    pub k_modes: usize,
    /// Number of equal time intervals the control is constant on, at most 3.
    pub m_intervals: usize,
    /// Coefficient levels for each masked mode on each interval; symmetric
    /// about zero, contains zero, at most 21 entries.
    pub amp_grid: Vec<f64>,
}

/// Largest number of candidates the enumerator accepts.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinBracket {
    /// Largest level at which no enumerated control reaches the ball;
    /// `None` when even the zero control does.
    pub lower: Option<f64>,
    /// Smallest level at which some enumerated control reaches the ball;
    /// `None` when no level does (the value exceeds the largest level).
    pub upper: Option<f64>,
    /// Smallest pointwise norm among the feasible candidates.
    pub best_feasible_norm: Option<f64>,
    pub levels: Vec<f64>,
    pub candidates: u64,
}

impl GalerkinBracket {
    pub fn contains(&self, value: f64) -> bool {
        let above_lower = self.lower.is_none_or(|lo| value >= lo);
        match self.upper {
            Some(hi) => above_lower && value <= hi,
            None => value > self.levels.last().copied().unwrap_or(0.0),
        }
    }
}

fn validate_search(search: &GalerkinSearch, n: usize) -> Result<()> {
    let amp = &search.amp_grid;
    if !(1..=3).contains(&search.k_modes) || search.k_modes > n {
        return Err(Error::Argument(format!(
            "k_modes must lie in 1..=3, got {}",
            search.k_modes
        )));
    }
    if !(1..=3).contains(&search.m_intervals) {
        return Err(Error::Argument(format!(
            "m_intervals must lie in 1..=3, got {}",
            search.m_intervals
        )));
    }
    if amp.is_empty() || amp.len() > 21 {
        return Err(Error::Argument(format!(
            "amp_grid needs 1..=21 levels, got {}",
            amp.len()
        )));
    }
    let sorted = amp.windows(2).all(|w| w[0] < w[1]);
    let symmetric = amp
        .iter()
        .zip(amp.iter().rev())
        .all(|(a, b)| (a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    if !sorted || !symmetric || !amp.contains(&0.0) {
        return Err(Error::Argument(
            "amp_grid must be strictly increasing, symmetric about zero and contain zero".into(),
        ));
    }
    Ok(())
}

/// Brackets `alpha(T)` for the `k`-mode Galerkin projection of `problem` by
/// enumerating every control of the form
/// `u(t) = chi_omega sum_j c_{i,j} e_j` on time interval `i`, with each
/// `c_{i,j}` drawn from `amp_grid`.
///
/// Levels are the distinct magnitudes in `amp_grid`. A level is feasible when
/// some candidate whose pointwise norm does not exceed it drives the
/// projected state into the ball at `T`.
pub fn galerkin_bruteforce_alpha(
    problem: &ControlProblem,
    horizon: f64,
    search: &GalerkinSearch,
    execution: Execution,
) -> Result<GalerkinBracket> {
    let g = problem.grid();
    validate_search(search, g.n())?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Argument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let (k, m_int, levels_per_dof) = (search.k_modes, search.m_intervals, search.amp_grid.len());
    let candidates = (levels_per_dof as u128).pow((k * m_int) as u32);
    if candidates > ENUMERATION_BUDGET {
        return Err(Error::EnumerationTooLarge {
            candidates,
            budget: ENUMERATION_BUDGET,
        });
    }

    let spectrum = dirichlet_eigs(g, k)?;
    let modes = spectrum.eigenvectors();
    let lams = spectrum.eigenvalues();
    let a0: Vec<f64> = modes.iter().map(|e| g.h() * dot(problem.y0(), e)).collect();

    // gram[i][j] = <e_i, chi_omega e_j>
    let gram: Vec<Vec<f64>> = modes
        .iter()
        .map(|ei| {
            modes
                .iter()
                .map(|ej| {
                    g.h()
                        * ei.iter()
                            .zip(ej)
                            .zip(g.mask())
                            .map(|((a, b), w)| a * b * w)
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();

    // Every coefficient vector for a single interval: modal forcing and norm.
    let per_interval = levels_per_dof.pow(k as u32);
    let table: Vec<(Vec<f64>, f64)> = (0..per_interval)
        .map(|mut idx| {
            let c: Vec<f64> = (0..k)
                .map(|_| {
                    let v = search.amp_grid[idx % levels_per_dof];
                    idx /= levels_per_dof;
                    v
                })
                .collect();
            let forcing: Vec<f64> = gram.iter().map(|row| dot(row, &c)).collect();
            let norm = dot(&c, &forcing).max(0.0).sqrt();
            (forcing, norm)
        })
        .collect();

    let steps = problem.steps();
    let dt = horizon / steps as f64;
    let f = *problem.nonlinearity();
    let linear = f.is_zero();
    let r = problem.radius();
    let decay: Vec<f64> = lams.iter().map(|l| 1.0 / (1.0 + dt * l)).collect();

    let evaluate = |candidate: u64| -> f64 {
        let mut idx = candidate as usize;
        let mut choice = [0usize; 3];
        let mut norm = 0.0_f64;
        for slot in choice.iter_mut().take(m_int) {
            *slot = idx % per_interval;
            idx /= per_interval;
            norm = norm.max(table[*slot].1);
        }
        let mut a = a0.clone();
        let mut y = vec![0.0; if linear { 0 } else { g.n() }];
        let mut proj = vec![0.0; k];
        for s in 0..steps {
            let forcing = &table[choice[s * m_int / steps]].0;
            if !linear {
                y.iter_mut().enumerate().for_each(|(node, v)| {
                    *v = (0..k).map(|j| a[j] * modes[j][node]).sum::<f64>();
                    *v = f.value(*v);
                });
                for (p, e) in proj.iter_mut().zip(modes) {
                    *p = g.h() * dot(&y, e);
                }
            }
            for j in 0..k {
                a[j] = (a[j] - dt * proj[j] + dt * forcing[j]) * decay[j];
            }
        }
        let terminal = dot(&a, &a).sqrt();
        if terminal <= r {
            norm
        } else {
            f64::INFINITY
        }
    };

    let best = execution.map_reduce(candidates as u64, f64::INFINITY, evaluate, f64::min);

    let mut levels: Vec<f64> = search.amp_grid.iter().map(|a| a.abs()).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let best_feasible_norm = best.is_finite().then_some(best);
    let slack = 1e-12 * (1.0 + best);
    let upper = best_feasible_norm.and_then(|b| levels.iter().copied().find(|&l| l >= b - slack));
    let lower = match upper {
        Some(hi) => levels.iter().copied().rfind(|&l| l < hi),
        None => levels.last().copied(),
    };
    Ok(GalerkinBracket {
        lower,
        upper,
        best_feasible_norm,
        levels,
        candidates: candidates as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn paper_instance() -> ScalarInstance {
        ScalarInstance::new(2.0, 0.5, PI * PI).unwrap()
    }

    /// Dense RK4 integration of `a' = -lam a - M` until `a <= r`; the crossing
    /// inside the last step is located by linear interpolation.
    fn simulate_crossing(inst: &ScalarInstance, m: f64, dt: f64) -> f64 {
        let rhs = |a: f64| -inst.lam * a - m;
        let (mut a, mut t) = (inst.a0, 0.0);
        loop {
            let k1 = rhs(a);
            let k2 = rhs(a + 0.5 * dt * k1);
            let k3 = rhs(a + 0.5 * dt * k2);
            let k4 = rhs(a + dt * k3);
            let next = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if next <= inst.r {
                return t + dt * (a - inst.r) / (a - next);
            }
            a = next;
            t += dt;
        }
    }

    /// Terminal amplitude of `a' = -lam a - M` at `T` by RK4.
    fn simulate_terminal(inst: &ScalarInstance, m: f64, horizon: f64, steps: usize) -> f64 {
        let dt = horizon / steps as f64;
        let rhs = |a: f64| -inst.lam * a - m;
        let mut a = inst.a0;
        for _ in 0..steps {
            let k1 = rhs(a);
            let k2 = rhs(a + 0.5 * dt * k1);
            let k3 = rhs(a + 0.5 * dt * k2);
            let k4 = rhs(a + dt * k3);
            a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        a
    }

    #[test]
    fn scalar_tau_examples() {
        let inst = paper_instance();
        assert!((scalar_tau(&inst, 0.0) - 4f64.ln() / (PI * PI)).abs() < 1e-15);
        assert_eq!(scalar_tau(&inst, 0.0), inst.gamma());
        let tau10 = scalar_tau(&inst, 10.0);
        assert!((tau10 - simulate_crossing(&inst, 10.0, 1e-6)).abs() < 1e-9);
        assert!((tau10 - 0.069_79).abs() < 1e-5, "{tau10}");
        assert!(scalar_tau(&inst, 1e12) < 1e-9);
        assert!(scalar_tau(&inst, -1.0).is_nan());
    }

    #[test]
    fn scalar_alpha_examples() {
        let inst = paper_instance();
        assert_eq!(scalar_alpha(&inst, inst.gamma()).unwrap(), 0.0);
        let alpha = scalar_alpha(&inst, 0.1).unwrap();
        assert!((simulate_terminal(&inst, alpha, 0.1, 100_000) - 0.5).abs() < 1e-10);
        // 3.8614 is a rounded figure; the formula gives 3.86129.
        assert!((alpha - 3.8614).abs() < 2e-4, "{alpha}");
        assert!(scalar_alpha(&inst, 0.0).is_err());
        assert!(scalar_alpha(&inst, 1.1 * inst.gamma()).is_err());
    }

    #[test]
    fn scalar_identities_and_monotonicity() {
        let inst = ScalarInstance::new(3.0, 0.7, 12.0).unwrap();
        let gamma = inst.gamma();
        let mut prev_alpha = f64::INFINITY;
        for i in 1..=50 {
            let t = gamma * i as f64 / 50.0;
            let alpha = scalar_alpha(&inst, t).unwrap();
            assert!(alpha < prev_alpha || i == 50);
            prev_alpha = alpha;
            if alpha > 0.0 {
                assert!((scalar_tau(&inst, alpha) - t).abs() <= 1e-10 * (1.0 + t));
            }
        }
        let mut prev_tau = f64::INFINITY;
        for m in [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0] {
            let tau = scalar_tau(&inst, m);
            assert!(tau < prev_tau);
            prev_tau = tau;
            let back = scalar_alpha(&inst, tau).unwrap();
            assert!((back - m).abs() <= 1e-10 * (1.0 + m), "{m}: {back}");
        }
    }

    #[test]
    fn search_validation() {
        let ok = GalerkinSearch {
            k_modes: 1,
            m_intervals: 1,
            amp_grid: vec![-1.0, 0.0, 1.0],
        };
        assert!(validate_search(&ok, 10).is_ok());
        for bad in [
            GalerkinSearch {
                k_modes: 4,
                ..ok.clone()
            },
            GalerkinSearch {
                m_intervals: 0,
                ..ok.clone()
            },
            GalerkinSearch {
                amp_grid: vec![-1.0, 1.0],
                ..ok.clone()
            },
            GalerkinSearch {
                amp_grid: vec![-2.0, 0.0, 1.0],
                ..ok.clone()
            },
            GalerkinSearch {
                amp_grid: (-11..=11).map(f64::from).collect(),
                ..ok.clone()
            },
        ] {
            assert!(validate_search(&bad, 10).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn bracket_containment_logic() {
        let b = GalerkinBracket {
            lower: Some(3.5),
            upper: Some(4.0),
            best_feasible_norm: Some(4.0),
            levels: vec![0.0, 0.5, 3.5, 4.0],
            candidates: 4,
        };
        assert!(b.contains(3.86));
        assert!(!b.contains(4.1));
        let exhausted = GalerkinBracket {
            lower: Some(4.0),
            upper: None,
            best_feasible_norm: None,
            ..b
        };
        assert!(exhausted.contains(7.0));
        assert!(!exhausted.contains(3.0));
    }
}
