use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("operation requires {0}")]
    UnsupportedChart(String),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("caustic: particle trajectories cross at t = {time:.6}")]
    Caustic { time: f64 },
    #[error("map folds: det D(eta) = {min_det:.3e} <= 0")]
    FoldingMap { min_det: f64 },
    #[error("convexity guard violated: min det(I + D^2 u) = {min_det:.3e}")]
    ConvexityGuard { min_det: f64 },
    #[error("Newton solver failed after {iterations} iterations (residual {residual:.3e}): {reason}")]
    NewtonFailed {
        iterations: usize,
        residual: f64,
        reason: String,
    },
    #[error("degenerate start: |grad psi| vanishes")]
    DegenerateStart,
    #[error("all {0} restarts failed")]
    SearchFailed(usize),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("particle left the chart at t = {time:.6}")]
    LeftChart { time: f64 },
    #[error("mass drift {0:.3e} exceeds limit")]
    MassDrift(f64),
    #[error("time integration unstable: {0}")]
    Unstable(String),
    #[error("step too small: {0}")]
    StepTooSmall(String),
}

pub type Result<T> = std::result::Result<T, Error>;
