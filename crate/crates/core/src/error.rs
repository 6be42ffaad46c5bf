use thiserror::Error;

/// Errors raised by scenario validation, simulation, gradient evaluation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// `index` is 1-based, matching the file formats.
    #[error("invalid target {index}: {reason}")]
    InvalidTarget { index: usize, reason: String },

    /// `index` is 1-based, matching the file formats.
    #[error("invalid agent {index}: {reason}")]
    InvalidAgent { index: usize, reason: String },

    /// `agent` is 1-based.
    #[error("invalid parameters for agent {agent}: {reason}")]
    InvalidParams { agent: usize, reason: String },

    /// The integrator met a state it cannot continue from (missed guard, negative uncertainty).
    #[error("integration failure on interval [{start}, {end}]: {reason}")]
    Integration {
        start: f64,
        end: f64,
        reason: String,
    },

    #[error("gradient invariant violated at t={time}: {reason}")]
    Ipa { time: f64, reason: String },

    #[error("non-finite gradient for agent {agent} at iteration {iteration}")]
    NonFiniteGradient { agent: usize, iteration: usize },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad input rather than by a run going wrong.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidScenario(_)
                | Error::InvalidTarget { .. }
                | Error::InvalidAgent { .. }
                | Error::InvalidParams { .. }
                | Error::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
