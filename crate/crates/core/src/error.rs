//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("eigen-solver failed to converge on a {0}x{0} matrix")]
    EigenSolver(usize),

    #[error("spectral construction: {0}")]
    Spectral(String),

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("Newton iteration did not converge in {iterations} iterations; worst residual {residual:e} at transverse index ({iy1}, {iy2})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        iy1: usize,
        iy2: usize,
    },

    #[error("blow-up at t = {t}: {detail}")]
    BlowUp { t: f64, detail: String },

    #[error("perturbation reached the domain edge at t = {t} ({edge}); enlarge the domain")]
    Containment { t: f64, edge: String },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Dimension(_) => "dimension",
            LabError::Grid(_) => "grid",
            LabError::Invalid(_) => "invalid",
            LabError::EigenSolver(_) => "eigen_solver",
            LabError::Spectral(_) => "spectral",
            LabError::Integration(_) => "integration",
            LabError::NoConvergence { .. } => "no_convergence",
            LabError::BlowUp { .. } => "blow_up",
            LabError::Containment { .. } => "containment",
            LabError::Config { .. } => "config",
            LabError::Format(_) => "format",
            LabError::Io(_) => "io",
        }
    }

    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        LabError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
