//! Reachability oracle: can a control with `‖u(t)‖ <= M` steer `y0` into the
//! target ball at time `T`?
//!
//! The oracle minimizes `J(v) = ½ ‖y(T; v, y0)‖²` over the pointwise ball
//! constraint by projected gradient descent with Barzilai-Borwein steps and
//! monotone backtracking. Gradients come from the exact discrete adjoint, so
//! they are accurate to rounding. For `f = 0` the problem is convex and the
//! Frank-Wolfe gap gives a lower bound on the optimal value, which lets the
//! oracle certify infeasibility without waiting for full convergence. For
//! nonlinear `f` the method is local; several starting points are tried.

use serde::Serialize;

use crate::bangbang::extract_bangbang;
use crate::domain::{dot, ControlSignal, SpatialGrid, StateTrajectory};
use crate::error::{Error, Result};
use crate::pde::solve_adjoint;
use crate::problem::ControlProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct ReachOptions {
    pub max_iters: usize,
    /// Step multiplier applied on each rejected trial.
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Armijo constant for the sufficient-decrease test.
    pub armijo: f64,
    /// Stationarity threshold on the projected-gradient residual, relative to
    /// `M sqrt(T)`.
    pub stagnation_tol: f64,
    /// Feasibility slack relative to `r`.
    pub feasibility_slack: f64,
    /// Restart from the remaining starting points when the best one ends
    /// infeasible on a nonconvex instance.
    pub multi_start: bool,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            backtrack_factor: 0.5,
            max_backtracks: 40,
            armijo: 1e-4,
            stagnation_tol: 1e-6,
            feasibility_slack: 1e-3,
            multi_start: true,
        }
    }
}

impl ReachOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.backtrack_factor,
            self.armijo,
            self.stagnation_tol,
            self.feasibility_slack,
        ];
        if self.max_iters == 0
            || self.max_backtracks == 0
            || positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || self.backtrack_factor >= 1.0
            || self.feasibility_slack >= 0.5
        {
            return Err(Error::Argument(format!("invalid reach options: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Terminal norm dropped below `r - slack`.
    TargetReached,
    /// Projected-gradient residual below tolerance.
    Stationary,
    /// No trial step decreased `J` within the backtracking budget.
    Stalled,
    /// Convex lower bound on `J` exceeds `½ (r + slack)²`.
    InfeasibilityCertified,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    /// Budget exhausted before either conclusion could be drawn.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachResult {
    pub horizon: f64,
    pub bound: f64,
    pub terminal_norm: f64,
    pub control: ControlSignal,
    /// Descent iterations summed over all starting points.
    pub iterations: usize,
    pub feasible: bool,
    pub converged: bool,
    pub termination: Termination,
    /// `J` after every accepted step of the returned run.
    pub objective_history: Vec<f64>,
}

impl ReachResult {
    pub fn status(&self) -> Feasibility {
        if self.feasible {
            Feasibility::Feasible
        } else if self.converged {
            Feasibility::Infeasible
        } else {
            Feasibility::Inconclusive
        }
    }
}

/// Radial projection of every step onto the ball of radius `M`.
pub fn project_pointwise(u: &ControlSignal, m: f64, g: &SpatialGrid) -> Result<ControlSignal> {
    if !(m >= 0.0) {
        return Err(Error::Argument(format!(
            "control bound must be nonnegative, got {m}"
        )));
    }
    let mut out = u.clone();
    project_in_place(&mut out, m, g);
    Ok(out)
}

fn project_in_place(u: &mut ControlSignal, m: f64, g: &SpatialGrid) {
    let h = g.h();
    for step in u.steps_mut() {
        let norm = (h * dot(step, step)).sqrt();
        // Strict threshold keeps the projection idempotent under rounding.
        if norm > m * (1.0 + 1e-14) {
            let scale = if norm > 0.0 { m / norm } else { 0.0 };
            step.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Inner product on `L²(0, T; L²(Ω))` for piecewise-constant controls.
fn control_inner(a: &ControlSignal, b: &ControlSignal, g: &SpatialGrid) -> f64 {
    a.dt() * g.h() * dot(a.data(), b.data())
}

fn objective(y: &StateTrajectory) -> f64 {
    0.5 * y.terminal_norm() * y.terminal_norm()
}

/// `J(v)` and the trajectory it was computed from.
pub fn terminal_objective(
    problem: &ControlProblem,
    v: &ControlSignal,
) -> Result<(f64, StateTrajectory)> {
    let y = problem.simulate(v)?;
    let j = objective(&y);
    if !j.is_finite() {
        return Err(Error::Divergence { step: y.nt() });
    }
    Ok((j, y))
}

/// Gradient of `J` in the `L²(0, T; L²(Ω))` inner product: `chi_omega p_k`
/// with `p` the adjoint driven by `y(T)`.
pub fn terminal_gradient(problem: &ControlProblem, y: &StateTrajectory) -> Result<ControlSignal> {
    let g = problem.grid();
    let psi = solve_adjoint(y, y.terminal(), problem.nonlinearity(), g)?;
    let mut data = Vec::with_capacity(y.nt() * g.n());
    for p in psi.step_costates() {
        data.extend(p.iter().zip(g.mask()).map(|(v, w)| v * w));
    }
    Ok(ControlSignal::from_raw(y.dt(), y.nt(), g.n(), data))
}

/// Relative discrepancy between the adjoint directional derivative of `J`
/// and a five-point central difference with step `fd_step`.
pub fn gradient_fd_check(
    problem: &ControlProblem,
    v: &ControlSignal,
    direction: &ControlSignal,
    fd_step: f64,
) -> Result<f64> {
    let g = problem.grid();
    if direction.nt() != v.nt() || direction.n() != v.n() {
        return Err(Error::Dimension {
            expected: v.nt(),
            got: direction.nt(),
        });
    }
    if !direction.is_supported_in(g) {
        return Err(Error::Argument(
            "direction must vanish outside the control region".into(),
        ));
    }
    let (_, y) = terminal_objective(problem, v)?;
    let grad = terminal_gradient(problem, &y)?;
    let analytic = control_inner(&grad, direction, g);

    let shifted = |sign: f64| -> Result<f64> {
        let mut w = v.clone();
        for (a, d) in w.data_mut().iter_mut().zip(direction.data()) {
            *a += sign * fd_step * d;
        }
        Ok(terminal_objective(problem, &w)?.0)
    };
    // Five-point stencil, fourth order in the step.
    let fd = (8.0 * (shifted(1.0)? - shifted(-1.0)?) - (shifted(2.0)? - shifted(-2.0)?))
        / (12.0 * fd_step);
    let scale = analytic.abs().max(fd.abs());
    Ok(if scale == 0.0 {
        0.0
    } else {
        (analytic - fd).abs() / scale
    })
}

/// Finite-difference step for [`gradient_fd_check`], for directions with
/// nodal values of order one. Rounding in `J` dominates the stencil error
/// well past these steps, and `J` is quadratic when `f = 0`, so the stencil
/// is exact there for any step.
pub fn default_fd_step(problem: &ControlProblem) -> f64 {
    if problem.nonlinearity().is_zero() {
        1.0
    } else {
        5e-2
    }
}

struct Run {
    control: ControlSignal,
    j: f64,
    iterations: usize,
    termination: Termination,
    history: Vec<f64>,
}

/// Minimizes the terminal norm at horizon `T` under `‖u(t_k)‖ <= M`.
pub fn min_terminal_norm(
    problem: &ControlProblem,
    horizon: f64,
    m: f64,
    opts: &ReachOptions,
) -> Result<ReachResult> {
    min_terminal_norm_from(problem, horizon, m, opts, None)
}

/// As [`min_terminal_norm`], additionally trying `warm` as a starting point.
/// A warm start on a different horizon is reinterpreted step by step.
pub fn min_terminal_norm_from(
    problem: &ControlProblem,
    horizon: f64,
    m: f64,
    opts: &ReachOptions,
    warm: Option<&ControlSignal>,
) -> Result<ReachResult> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Argument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::Argument(format!(
            "control bound must be nonnegative, got {m}"
        )));
    }
    opts.validate()?;
    let g = problem.grid();
    let dt = problem.dt(horizon);
    let r = problem.radius();
    let slack = opts.feasibility_slack * r;

    // Candidate starting points, evaluated and ordered by J.
    let zero = problem.zero_control(horizon);
    let (j_zero, y_zero) = terminal_objective(problem, &zero)?;
    let mut starts = vec![(j_zero, zero)];
    if m > 0.0 {
        let neg_terminal: Vec<f64> = y_zero.terminal().iter().map(|v| -v).collect();
        let psi = solve_adjoint(&y_zero, &neg_terminal, problem.nonlinearity(), g)?;
        if let Ok(bang) = extract_bangbang(&psi, m, g) {
            let (j, _) = terminal_objective(problem, &bang)?;
            starts.push((j, bang));
        }
        if let Some(w) = warm.filter(|w| w.nt() == problem.steps() && w.n() == g.n()) {
            let mut w = w.with_dt(dt);
            project_in_place(&mut w, m, g);
            let (j, _) = terminal_objective(problem, &w)?;
            starts.push((j, w));
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let convex = problem.nonlinearity().is_zero();
    let mut best: Option<Run> = None;
    let mut iterations = 0;
    for (_, start) in starts {
        let run = descend(problem, start, m, opts, r, slack, convex)?;
        iterations += run.iterations;
        let reached = run.j.sqrt() * 2f64.sqrt() <= r + slack;
        let better = best.as_ref().is_none_or(|b| run.j < b.j);
        if better {
            best = Some(run);
        }
        if reached || convex || !opts.multi_start {
            break;
        }
    }
    let run = best.expect("at least one starting point");
    let terminal_norm = (2.0 * run.j).sqrt();
    let feasible = terminal_norm <= r + slack;
    let converged = !matches!(run.termination, Termination::IterationLimit);
    Ok(ReachResult {
        horizon,
        bound: m,
        terminal_norm,
        control: run.control,
        iterations,
        feasible,
        converged: converged || feasible,
        termination: run.termination,
        objective_history: run.history,
    })
}

fn descend(
    problem: &ControlProblem,
    start: ControlSignal,
    m: f64,
    opts: &ReachOptions,
    r: f64,
    slack: f64,
    convex: bool,
) -> Result<Run> {
    let g = problem.grid();
    let horizon = start.horizon();
    let target = 0.5 * (r - slack) * (r - slack);
    let certified = 0.5 * (r + slack) * (r + slack);
    let reference_step = 1.0 / problem.lambda1();
    let stationary_tol = opts.stagnation_tol * m * horizon.sqrt();

    let mut v = start;
    let (mut j, mut y) = terminal_objective(problem, &v)?;
    let mut history = vec![j];
    let mut step = reference_step;
    let mut previous: Option<(ControlSignal, ControlSignal)> = None;

    let finish = |control, j, iterations, termination, history| {
        Ok(Run {
            control,
            j,
            iterations,
            termination,
            history,
        })
    };

    for iter in 0..opts.max_iters {
        if j <= target {
            return finish(v, j, iter, Termination::TargetReached, history);
        }
        if m == 0.0 {
            return finish(v, j, iter, Termination::Stationary, history);
        }
        let grad = terminal_gradient(problem, &y)?;

        if convex {
            // J* >= J(v) - max_{‖w_k‖ <= M} <grad, v - w>.
            let gap: f64 = v
                .steps()
                .zip(grad.steps())
                .map(|(vk, gk)| dot(vk, gk) * g.h() + m * g.norm_unchecked(gk))
                .sum::<f64>()
                * v.dt();
            if j - gap > certified {
                return finish(v, j, iter, Termination::InfeasibilityCertified, history);
            }
        }

        if let Some((v_prev, g_prev)) = &previous {
            let sv: Vec<f64> = v
                .data()
                .iter()
                .zip(v_prev.data())
                .map(|(a, b)| a - b)
                .collect();
            let sg: Vec<f64> = grad
                .data()
                .iter()
                .zip(g_prev.data())
                .map(|(a, b)| a - b)
                .collect();
            let curvature = dot(&sv, &sg);
            if curvature > 0.0 {
                step =
                    (dot(&sv, &sv) / curvature).clamp(1e-6 * reference_step, 1e8 * reference_step);
            } else {
                step = (2.0 * step).min(1e8 * reference_step);
            }
        }

        // Stationarity is judged on the projected step at the curvature-scaled
        // step size; the fixed seed step of the first iteration says little
        // when the control has weak leverage on the terminal state.
        let mut first = v.clone();
        for (t, d) in first.data_mut().iter_mut().zip(grad.data()) {
            *t -= step * d;
        }
        project_in_place(&mut first, m, g);
        if previous.is_some() && distance(&first, &v, g) <= stationary_tol {
            return finish(v, j, iter, Termination::Stationary, history);
        }

        let mut accepted = None;
        let mut trial = first;
        for attempt in 0..opts.max_backtracks {
            if attempt > 0 {
                trial = v.clone();
                for (t, d) in trial.data_mut().iter_mut().zip(grad.data()) {
                    *t -= step * d;
                }
                project_in_place(&mut trial, m, g);
            }
            let predicted = control_inner(&grad, &v, g) - control_inner(&grad, &trial, g);
            let (j_trial, y_trial) = terminal_objective(problem, &trial)?;
            if j_trial <= j - opts.armijo * predicted && j_trial <= j {
                accepted = Some((trial, j_trial, y_trial));
                break;
            }
            step *= opts.backtrack_factor;
        }
        let Some((trial, j_trial, y_trial)) = accepted else {
            return finish(v, j, iter, Termination::Stalled, history);
        };
        previous = Some((std::mem::replace(&mut v, trial), grad));
        j = j_trial;
        y = y_trial;
        history.push(j);
    }
    let termination = if j <= target {
        Termination::TargetReached
    } else {
        Termination::IterationLimit
    };
    finish(v, j, opts.max_iters, termination, history)
}

fn distance(a: &ControlSignal, b: &ControlSignal, g: &SpatialGrid) -> f64 {
    let d2: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    (a.dt() * g.h() * d2).sqrt()
}

/// True when the oracle finds a control reaching `B(0, r + slack)` at `T`.
pub fn feasible(
    problem: &ControlProblem,
    horizon: f64,
    m: f64,
    opts: &ReachOptions,
) -> Result<bool> {
    Ok(min_terminal_norm(problem, horizon, m, opts)?.feasible)
}
