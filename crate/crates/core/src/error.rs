use thiserror::Error;

/// Errors raised by the model, the solvers and the post-processing passes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("no root: level {level} lies below the minimum {minimum} of the potential")]
    NoRoot { level: f64, minimum: f64 },

    #[error("degenerate datum: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integrator failure at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("stiffness failure: step size {dt:e} underflowed at t = {t}")]
    Stiffness { t: f64, dt: f64 },

    #[error("divergence at step {step} (t = {t}): non-finite value in {field}")]
    Divergence { step: usize, t: f64, field: &'static str },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shift h = {h} is below the grid resolution dx = {dx}")]
    Resolution { h: f64, dx: f64 },

    #[error("window error: {0}")]
    Window(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
