use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The initial state already lies in the closed target ball.
    #[error("initial state lies in the target ball: ||y0|| = {norm} <= r = {radius}")]
    InsideTarget { norm: f64, radius: f64 },

    #[error("solver diverged: non-finite value at step {step}")]
    Divergence { step: usize },

    #[error("degenerate costate at step {step}: ||chi_omega psi|| = {norm:e}")]
    DegenerateCostate { step: usize, norm: f64 },

    #[error("uncontrolled trajectory does not enter the target ball before t = {horizon}")]
    HorizonExhausted { horizon: f64 },

    #[error("no feasible control bound found up to M = {bound}")]
    InfeasibilitySuspected { bound: f64 },

    #[error("enumeration of {candidates} candidates exceeds the budget of {budget}")]
    EnumerationTooLarge { candidates: u128, budget: u128 },
}

pub(crate) fn check_len(v: &[f64], expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            got: v.len(),
        })
    }
}
