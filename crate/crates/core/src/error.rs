use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout error: {0}")]
    Layout(String),

    #[error("truncation N={actual} is below the safe bound {required} for {what}")]
    Truncation {
        what: String,
        required: usize,
        actual: usize,
    },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integrator step-size failure at t={t:.6e}: {reason}")]
    StepSize { t: f64, reason: String },

    #[error("degenerate steady-state manifold of dimension {dimension}")]
    DegenerateSteadyState { dimension: usize },

    #[error("steady state did not converge: {0}")]
    SteadyState(String),

    #[error("fit did not converge after {restarts} starts (best cost {best_cost:.6e}): {detail}")]
    FitConvergence {
        restarts: usize,
        best_cost: f64,
        detail: String,
    },

    /// The requested model is degenerate for the data; a simpler family fits.
    #[error("{0}")]
    Advisory(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("config digest mismatch: file has {found}, config gives {expected} (use --force to override)")]
    DigestMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 for validation problems, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::StepSize { .. }
            | Error::DegenerateSteadyState { .. }
            | Error::SteadyState(_)
            | Error::FitConvergence { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
