//! Value functions by bisection over the reachability oracle.
//!
//! - `gamma`: free-decay hitting time of the target ball;
//! - `alpha(T)`: smallest pointwise bound that reaches the ball at `T`;
//! - `tau(M)`: smallest time at which a control bounded by `M` reaches it.
//!
//! Feasibility is monotone in `M` (nested constraint sets) and in `T` (once
//! in the ball, the uncontrolled flow keeps the state there), so both value
//! functions are bracketed by plain bisection.

use serde::Serialize;

use crate::domain::ControlSignal;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pde::hitting_time;
use crate::problem::ControlProblem;
use crate::reach::{min_terminal_norm_from, Feasibility, ReachOptions, ReachResult};

pub use crate::bangbang::{bangbang_report, extract_bangbang};

/// Horizon extensions attempted by [`gamma`] before giving up.
const GAMMA_EXTENSIONS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub reach: ReachOptions,
    /// Bisection tolerance on `T`, relative to `gamma(y0)`.
    pub tol_time: f64,
    /// Bisection tolerance on `M`, relative to `1 + M_upper`.
    pub tol_norm: f64,
    /// Doublings of the upper bound on `M` before giving up.
    pub max_doublings: usize,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            reach: ReachOptions::default(),
            tol_time: 1e-3,
            tol_norm: 1e-3,
            max_doublings: 40,
            execution: Execution::default(),
        }
    }
}

/// First time the uncontrolled trajectory enters the target ball.
///
/// Starts from 1.5 times the spectral estimate `ln(‖y0‖ / r) / lambda_1`,
/// doubles the horizon until a crossing shows up, and shrinks it once when
/// the crossing falls in the first half so the step size tracks `gamma`.
pub fn gamma(problem: &ControlProblem) -> Result<f64> {
    let estimate = (problem.y0_norm() / problem.radius()).ln() / problem.lambda1();
    let mut horizon = 1.5 * estimate;
    let mut shrunk = false;
    for _ in 0..GAMMA_EXTENSIONS {
        let y = problem.uncontrolled(horizon)?;
        match hitting_time(&y, problem.ball()) {
            Some(t) if t >= 0.5 * horizon || shrunk => return Ok(t),
            Some(t) => {
                horizon = 1.2 * t + 2.0 * y.dt();
                shrunk = true;
            }
            None => horizon *= 2.0,
        }
    }
    Err(Error::HorizonExhausted { horizon })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionDiagnostics {
    pub iterations: usize,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub tolerance: f64,
    pub oracle_calls: usize,
    pub oracle_iterations: usize,
    /// Probes that ran out of budget and were treated as infeasible.
    pub inconclusive_probes: usize,
}

impl BisectionDiagnostics {
    fn new(lo: f64, hi: f64, tolerance: f64) -> Self {
        Self {
            iterations: 0,
            bracket_lo: lo,
            bracket_hi: hi,
            tolerance,
            oracle_calls: 0,
            oracle_iterations: 0,
            inconclusive_probes: 0,
        }
    }

    fn record(&mut self, res: &ReachResult) {
        self.oracle_calls += 1;
        self.oracle_iterations += res.iterations;
        if res.status() == Feasibility::Inconclusive {
            self.inconclusive_probes += 1;
        }
    }

    pub fn width(&self) -> f64 {
        self.bracket_hi - self.bracket_lo
    }
}

/// One sample of `alpha(T)` or `tau(M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePoint {
    /// `T` for `alpha`, `M` for `tau`.
    pub parameter: f64,
    /// Midpoint of the final bracket.
    pub value: f64,
    /// Control certified feasible at the bracket endpoint; defined on
    /// `[0, horizon]`.
    pub control: ControlSignal,
    pub horizon: f64,
    pub diagnostics: BisectionDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Tau,
    Alpha,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueCurve {
    pub kind: CurveKind,
    pub gamma: f64,
    pub points: Vec<ValuePoint>,
}

impl ValueCurve {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].value < w[0].value)
    }

    pub fn non_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].value <= w[0].value)
    }

    /// For a `tau` curve: `|tau(M_min) - gamma| / gamma`.
    pub fn small_parameter_gap(&self) -> Option<f64> {
        self.points
            .first()
            .map(|p| (p.value - self.gamma).abs() / self.gamma)
    }

    /// For a `tau` curve: `tau(M_max) / gamma`, which tends to zero.
    pub fn large_parameter_ratio(&self) -> Option<f64> {
        self.points.last().map(|p| p.value / self.gamma)
    }
}

/// Round trip `alpha -> tau` or `tau -> alpha` through the value functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub parameter: f64,
    /// `alpha(T)` or `tau(M)`.
    pub value: f64,
    /// `tau(alpha(T))` or `alpha(tau(M))`.
    pub round_trip: f64,
    pub residual: f64,
    /// Residual divided by the parameter (zero when the parameter is zero).
    pub relative_residual: f64,
    /// For `T`: hitting time of the minimal-norm control extended by zero.
    /// For `M`: largest pointwise norm of the time-optimal control.
    pub control_check: Option<f64>,
    /// Whether the transferred control behaves as the equivalence predicts.
    pub control_check_passes: bool,
}

/// Bisection-based evaluator of the value functions for one instance.
#[derive(Debug, Clone)]
pub struct ValueSolver {
    problem: ControlProblem,
    opts: SolverOptions,
    gamma: f64,
}

impl ValueSolver {
    pub fn new(problem: ControlProblem, opts: SolverOptions) -> Result<Self> {
        opts.reach.validate()?;
        if !(opts.tol_time > 0.0 && opts.tol_norm > 0.0) {
            return Err(Error::Argument(
                "bisection tolerances must be positive".into(),
            ));
        }
        let gamma = gamma(&problem)?;
        Ok(Self {
            problem,
            opts,
            gamma,
        })
    }

    pub fn problem(&self) -> &ControlProblem {
        &self.problem
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn probe(
        &self,
        horizon: f64,
        m: f64,
        warm: Option<&ControlSignal>,
        diag: &mut BisectionDiagnostics,
    ) -> Result<ReachResult> {
        let res = min_terminal_norm_from(&self.problem, horizon, m, &self.opts.reach, warm)?;
        diag.record(&res);
        Ok(res)
    }

    /// `alpha(T)`: zero for `T >= gamma`, otherwise bisection on `M`.
    pub fn minimal_norm(&self, horizon: f64) -> Result<ValuePoint> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Argument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if horizon >= self.gamma {
            return Ok(ValuePoint {
                parameter: horizon,
                value: 0.0,
                control: self.problem.zero_control(horizon),
                horizon,
                diagnostics: BisectionDiagnostics::new(0.0, 0.0, 0.0),
            });
        }
        let mut diag = BisectionDiagnostics::new(0.0, 1.0, 0.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut warm: Option<ControlSignal> = None;
        let mut found = None;
        for _ in 0..=self.opts.max_doublings {
            let res = self.probe(horizon, hi, warm.as_ref(), &mut diag)?;
            if res.feasible {
                found = Some(res.control);
                break;
            }
            lo = hi;
            hi *= 2.0;
            warm = Some(res.control);
        }
        let mut control = found.ok_or(Error::InfeasibilitySuspected { bound: lo })?;
        while hi - lo > self.opts.tol_norm * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            let res = self.probe(horizon, mid, Some(&control), &mut diag)?;
            if res.feasible {
                hi = mid;
                control = res.control;
            } else {
                lo = mid;
            }
            diag.iterations += 1;
        }
        diag.bracket_lo = lo;
        diag.bracket_hi = hi;
        diag.tolerance = self.opts.tol_norm * (1.0 + hi);
        Ok(ValuePoint {
            parameter: horizon,
            value: 0.5 * (lo + hi),
            control,
            horizon,
            diagnostics: diag,
        })
    }

    /// `tau(M)`: `gamma` for `M = 0`, otherwise bisection on `T` over
    /// `(0, gamma]`.
    pub fn minimal_time(&self, m: f64) -> Result<ValuePoint> {
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::Argument(format!(
                "control bound must be nonnegative, got {m}"
            )));
        }
        let tol = self.opts.tol_time * self.gamma;
        let mut control = self.problem.zero_control(self.gamma);
        if m == 0.0 {
            return Ok(ValuePoint {
                parameter: 0.0,
                value: self.gamma,
                control,
                horizon: self.gamma,
                diagnostics: BisectionDiagnostics::new(self.gamma, self.gamma, tol),
            });
        }
        let mut diag = BisectionDiagnostics::new(0.0, self.gamma, tol);
        let (mut lo, mut hi) = (0.0, self.gamma);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let res = self.probe(mid, m, Some(&control), &mut diag)?;
            if res.feasible {
                hi = mid;
                control = res.control;
            } else {
                lo = mid;
            }
            diag.iterations += 1;
        }
        diag.bracket_lo = lo;
        diag.bracket_hi = hi;
        Ok(ValuePoint {
            parameter: m,
            value: 0.5 * (lo + hi),
            control,
            horizon: hi,
            diagnostics: diag,
        })
    }

    /// `|tau(alpha(T)) - T|`, plus the hitting time of the minimal-norm
    /// control extended by zero past `T`.
    pub fn verify_equivalence_t(&self, horizon: f64) -> Result<EquivalenceReport> {
        if !(horizon > 0.0 && horizon <= self.gamma) {
            return Err(Error::Argument(format!(
                "horizon {horizon} outside (0, gamma = {}]",
                self.gamma
            )));
        }
        let alpha = self.minimal_norm(horizon)?;
        let tau = self.minimal_time(alpha.value)?;
        let residual = (tau.value - horizon).abs();

        let extended = alpha.control.extended_by_zero(self.problem.steps());
        let y = self.problem.simulate(&extended)?;
        let hit = hitting_time(&y, self.problem.ball());
        let tol = self.opts.tol_time * self.gamma;
        let control_check_passes = hit.is_some_and(|t| (t - horizon).abs() <= tol);
        Ok(EquivalenceReport {
            parameter: horizon,
            value: alpha.value,
            round_trip: tau.value,
            residual,
            relative_residual: residual / horizon,
            control_check: hit,
            control_check_passes,
        })
    }

    /// `|alpha(tau(M)) - M|`, plus the pointwise bound of the time-optimal
    /// control restricted to `(0, tau(M))`.
    pub fn verify_equivalence_m(&self, m: f64) -> Result<EquivalenceReport> {
        let tau = self.minimal_time(m)?;
        let alpha = self.minimal_norm(tau.value)?;
        let residual = (alpha.value - m).abs();
        let sup = tau.control.sup_norm(self.problem.grid());
        let y = self.problem.simulate(&tau.control)?;
        let r = self.problem.radius() * (1.0 + self.opts.reach.feasibility_slack);
        Ok(EquivalenceReport {
            parameter: m,
            value: tau.value,
            round_trip: alpha.value,
            residual,
            relative_residual: if m > 0.0 { residual / m } else { 0.0 },
            control_check: Some(sup),
            control_check_passes: sup <= m * (1.0 + 1e-6) && y.terminal_norm() <= r,
        })
    }

    /// `tau` on a strictly increasing grid of bounds, evaluated per point
    /// under the configured execution policy.
    pub fn tau_curve(&self, bounds: &[f64]) -> Result<ValueCurve> {
        check_increasing(bounds)?;
        let points = self
            .opts
            .execution
            .map(bounds, |&m| self.minimal_time(m))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(ValueCurve {
            kind: CurveKind::Tau,
            gamma: self.gamma,
            points,
        })
    }

    /// `alpha` on a strictly increasing grid of horizons in `(0, gamma]`.
    pub fn alpha_curve(&self, horizons: &[f64]) -> Result<ValueCurve> {
        check_increasing(horizons)?;
        if let Some(&t) = horizons.iter().find(|&&t| !(t > 0.0 && t <= self.gamma)) {
            return Err(Error::Argument(format!(
                "horizon {t} outside (0, gamma = {}]",
                self.gamma
            )));
        }
        let points = self
            .opts
            .execution
            .map(horizons, |&t| self.minimal_norm(t))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(ValueCurve {
            kind: CurveKind::Alpha,
            gamma: self.gamma,
            points,
        })
    }
}

fn check_increasing(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(format!(
            "grid must be finite and strictly increasing: {grid:?}"
        )));
    }
    Ok(())
}
