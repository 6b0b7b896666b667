use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a model invariant.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// The `Y1` block of the Riccati representation could not be inverted.
    #[error("Riccati Y1 block is numerically singular at t = {t} (condition estimate {condition:e})")]
    SingularY1 { t: f64, condition: f64 },

    #[error("degenerate jump likelihood: every latent state has zero {direction}-jump intensity")]
    DegenerateLikelihood { direction: &'static str },

    #[error("filter clamped negative probabilities on {clamped} of {steps} steps (time step too coarse)")]
    ExcessiveClamping { clamped: usize, steps: usize },

    #[error("invalid forced latent path: {0}")]
    InvalidForcedPath(String),

    #[error("best-response problem is not strictly concave (Hessian factorisation failed)")]
    IndefiniteHessian,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// Configuration document could not be parsed.
    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the command-line front end: 1 for bad input,
    /// 2 for runtime or numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Config { .. } | Error::InvalidForcedPath(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
