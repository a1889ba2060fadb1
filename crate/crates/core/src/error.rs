use thiserror::Error;

/// Errors raised by the simulation stack.
///
/// Variants map onto the CLI exit codes: configuration problems are
/// validation failures, everything numerical is a numerical failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate configuration: ions {i} and {j} are {distance:.3e} apart")]
    DegenerateConfiguration { i: usize, j: usize, distance: f64 },

    #[error("unstable motion: |Floquet multiplier| = {multiplier:.6} ({context})")]
    Instability { multiplier: f64, context: String },

    #[error("minimization did not converge (best gradient norm {best_residual:.3e})")]
    OptimizationFailure { best_residual: f64 },

    #[error("periodic-orbit Newton solve diverged; residual history {history:?}")]
    NewtonDivergence { history: Vec<f64> },

    #[error("configuration is not a minimum: Hessian eigenvalue {eigenvalue:.3e}")]
    Saddle { eigenvalue: f64 },

    #[error("kink classification failed: {0}")]
    Classification(String),

    #[error("no gap-separated localized mode: {0}")]
    NotLocalized(String),

    #[error("Fock truncation unhealthy: top-level population {population:.3e}; increase n_max_fock")]
    Truncation { population: f64 },

    #[error("integration failed at t = {time:.4}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("ion {ion} escaped at t = {time:.4} (distance {distance:.3e})")]
    Escape { ion: usize, time: f64, distance: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// True for failures caused by user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidParameter(_))
    }
}
