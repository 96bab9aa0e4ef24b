use std::fmt;

use thiserror::Error;

/// Errors raised by the training engine, the generators and the evaluation code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged: {0}")]
    Divergence(Box<DivergenceReport>),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn dimension(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}

/// Where and how a training stage blew up.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub stage: String,
    pub epoch: usize,
    pub iteration: usize,
    pub last_finite_loss: Option<f64>,
    pub detail: String,
}

impl fmt::Display for DivergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stage {} epoch {} iteration {}: {}",
            self.stage, self.epoch, self.iteration, self.detail
        )?;
        if let Some(loss) = self.last_finite_loss {
            write!(f, " (last finite mean loss {loss})")?;
        }
        Ok(())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
