use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),

    /// A closed-form expression was evaluated at one of its poles.
    #[error("pole in {quantity}: {detail}")]
    Pole { quantity: &'static str, detail: String },

    #[error("closed-form response undefined: mode eigenvalues are degenerate (|λ_l - λ_h| = {gap:.3e} rad/s)")]
    DegenerateMode { gap: f64 },

    #[error("step size {dt:.3e} s exceeds the stability limit {limit:.3e} s")]
    StepSize { dt: f64, limit: f64 },

    #[error("trajectory spans {available:.3e} s but {requested:.3e} s was requested")]
    Span { available: f64, requested: f64 },

    #[error("optimum of the drive-frequency search sits on the window boundary at {at_hz:.6e} Hz")]
    Window { at_hz: f64 },

    #[error("pointer states are indistinguishable (beta_e == beta_g over the window)")]
    ZeroSeparation,

    #[error("least squares did not converge after {iterations} iterations (residual norm {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("mixture component collapsed (weight {weight:.3e})")]
    DegenerateComponent { weight: f64 },

    #[error("Fock truncation too small: expected up to {expected:.2} photons in the {mode} mode with {levels} levels")]
    Truncation {
        mode: &'static str,
        expected: f64,
        levels: usize,
    },

    #[error("trace drifted to {trace:.12} during evolution")]
    TraceDrift { trace: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// |g/Δ_qr| is large enough that the dispersive expansion is questionable.
    DispersiveValidity { lambda: f64 },
    /// Outside the regime where the first-order normal-mode expansion holds.
    ExpansionValidity { detail: String },
    /// Fit covariance is ill-conditioned.
    Identifiability { condition_number: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::DispersiveValidity { lambda } => {
                write!(f, "|g/Δ_qr| = {:.3} ≥ 0.5: dispersive approximation unreliable", lambda.abs())
            }
            Warning::ExpansionValidity { detail } => write!(f, "normal-mode expansion: {detail}"),
            Warning::Identifiability { condition_number } => {
                write!(f, "fit covariance condition number {condition_number:.3e} > 1e10")
            }
        }
    }
}
