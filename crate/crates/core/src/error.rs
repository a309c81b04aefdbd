use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shift vector is zero")]
    ShiftIsZero,
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("cutoff {cutoff} gives {expected_jumps:.3e} expected jumps, budget is {budget:.3e}")]
    CutoffTooSmall {
        cutoff: f64,
        expected_jumps: f64,
        budget: f64,
    },
    #[error("force evaluated to a non-finite value at the given state")]
    NonFiniteForce,
    #[error("potential fails the superquadratic growth test: {0}")]
    GrowthTestFailed(String),
    #[error("cross term |r0| = {r0} must be smaller than r = {r}")]
    InvalidCross { r0: f64, r: f64 },
    #[error("admissible window for r is empty (margin {margin:.3e})")]
    EmptyWindow { margin: f64 },
    #[error("moment condition fails: {0}")]
    MomentFailure(String),
    #[error("quadrature exceeded its evaluation budget ({0} evaluations)")]
    QuadratureBudgetExceeded(usize),
    #[error("pair state is degenerate: {0}")]
    DegenerateState(&'static str),
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("integral of 1/sigma diverges at zero (exponent {0})")]
    SigmaNotIntegrable(f64),
    #[error("state became non-finite or exceeded the blow-up threshold at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("decay fit window is empty: {0}")]
    InsufficientDecay(String),
    #[error("empirical measure is empty")]
    EmptyMeasure,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
