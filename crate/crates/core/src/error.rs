use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the identification pipeline.
#[derive(Debug, Error)]
pub enum IciError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    /// A simulated signal left the finite range (non-finite or above the divergence sentinel).
    #[error("run diverged at step {step}")]
    Diverged { step: usize },

    #[error("training aborted: non-finite loss at epoch {epoch}, trajectory {trajectory}")]
    NonFiniteLoss { epoch: usize, trajectory: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IciError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IciError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = IciError> = std::result::Result<T, E>;

/// Magnitude above which a simulated signal is declared diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Returns `Err(Diverged)` if any component is non-finite or exceeds the sentinel.
pub fn check_finite(values: &[f64], step: usize) -> Result<()> {
    if values
        .iter()
        .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
    {
        Err(IciError::Diverged { step })
    } else {
        Ok(())
    }
}
