use crate::domain::{
    uniform_samples, validate_h1, validate_h2, ControlSignal, NonlinearitySpec, SpatialGrid,
    StateTrajectory, TargetBall,
};
use crate::error::{check_len, Error, Result};
use crate::pde::{first_eigenvalue, solve_forward};

/// Default number of time steps per solve.
pub const DEFAULT_STEPS: usize = 400;

/// A validated control instance: grid, nonlinearity, initial state and target.
///
/// Every horizon `T` is resolved with the same number of steps, so
/// `dt = T / steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    grid: SpatialGrid,
    nonlinearity: NonlinearitySpec,
    y0: Vec<f64>,
    ball: TargetBall,
    steps: usize,
    y0_norm: f64,
    lambda1: f64,
}

impl ControlProblem {
    /// Validates the nonlinearity on `[-50, 50]` and that `y0` lies outside
    /// the target ball.
    pub fn new(
        grid: SpatialGrid,
        nonlinearity: NonlinearitySpec,
        y0: Vec<f64>,
        ball: TargetBall,
        steps: usize,
    ) -> Result<Self> {
        check_len(&y0, grid.n())?;
        if steps == 0 {
            return Err(Error::Argument("step count must be positive".into()));
        }
        let h1 = validate_h1(&nonlinearity, &uniform_samples(-50.0, 50.0, 10_000))?;
        if !h1.passes() {
            return Err(Error::Argument(format!(
                "nonlinearity violates (H1): {h1:?}"
            )));
        }
        let y0_norm = validate_h2(&y0, &ball, &grid)?;
        let lambda1 = first_eigenvalue(&grid);
        Ok(Self {
            grid,
            nonlinearity,
            y0,
            ball,
            steps,
            y0_norm,
            lambda1,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn ball(&self) -> &TargetBall {
        &self.ball
    }

    pub fn radius(&self) -> f64 {
        self.ball.radius()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn y0_norm(&self) -> f64 {
        self.y0_norm
    }

    /// `lambda_{1,h}` of the grid.
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self {
            steps,
            ..self.clone()
        }
    }

    pub fn dt(&self, horizon: f64) -> f64 {
        horizon / self.steps as f64
    }

    pub fn zero_control(&self, horizon: f64) -> ControlSignal {
        ControlSignal::zeros(&self.grid, self.dt(horizon), self.steps)
    }

    pub fn simulate(&self, u: &ControlSignal) -> Result<StateTrajectory> {
        solve_forward(&self.y0, u, &self.nonlinearity, &self.grid)
    }

    pub fn uncontrolled(&self, horizon: f64) -> Result<StateTrajectory> {
        self.simulate(&self.zero_control(horizon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_initial_state_in_ball() {
        let g = SpatialGrid::whole_domain(1.0, 15).unwrap();
        let y0 = vec![0.1; 15];
        let err = ControlProblem::new(
            g,
            NonlinearitySpec::zero(),
            y0,
            TargetBall::new(0.5).unwrap(),
            100,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsideTarget { .. }));
    }
}
