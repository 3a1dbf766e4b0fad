use thiserror::Error;

/// Everything that can go wrong between reading a surface and exporting a mass report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular metric at node (i={i}, j={j}): det = {det:e}")]
    SingularMetric { i: usize, j: usize, det: f64 },

    #[error("admissibility failure: {0}")]
    Admissibility(String),

    #[error("surface is not axisymmetric: {0}")]
    NotAxisymmetric(String),

    #[error("embedding failed: {0}")]
    Embedding(String),

    #[error(
        "principal curvature {lambda} at node (i={i}, j={j}) is not above the horospherical bound kappa = {kappa}"
    )]
    HorosphericalBound { i: usize, j: usize, lambda: f64, kappa: f64 },

    #[error("non-positive lapse u = {value:e} at step {step}, node {node}")]
    NonPositiveLapse { step: usize, node: usize, value: f64 },

    #[error("positivity violation at step {step}: {reason}")]
    Positivity { step: usize, reason: String },

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("non-convergence: {0}")]
    NonConvergence(String),

    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Admissibility(_)
            | Error::NotAxisymmetric(_)
            | Error::HorosphericalBound { .. }
            | Error::SingularMetric { .. } => 2,
            Error::Embedding(_)
            | Error::NonPositiveLapse { .. }
            | Error::Positivity { .. }
            | Error::LinearSolver { .. }
            | Error::NonConvergence(_) => 3,
            Error::Io(_) => 4,
            Error::InvalidInput(_) | Error::Parse(_) | Error::ScheduleMismatch(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
