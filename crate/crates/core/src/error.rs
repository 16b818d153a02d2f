use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("support function is not strictly convex: min(h + h'') = {min_radius:.3e} at phi = {phi:.4}")]
    ConvexityViolation { min_radius: f64, phi: f64 },

    #[error("invalid body specification: {0}")]
    InvalidSpec(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("relative velocity {0:.3e} too small for an escape-time bound")]
    DegenerateVelocity(f64),

    #[error("could not place atom {placed} of {requested} after {attempts} attempts (outside the dilute regime)")]
    PackingFailure {
        placed: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("thinning envelope breached: acceptance ratio {0}")]
    EnvelopeBreach(f64),

    #[error("overlap detected at t = {t}: {detail}")]
    OverlapDetected { t: f64, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
