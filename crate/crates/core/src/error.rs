use std::io;

use thiserror::Error;

pub type Result<T, E = NashError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NashError {
    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("model error: non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, iteration {iter}: {reason}")]
    Diverged {
        epoch: usize,
        iter: u64,
        reason: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown word `{probe}`; closest vocabulary entries: {suggestions:?}")]
    Lookup {
        probe: String,
        suggestions: Vec<String>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl NashError {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        NashError::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn parse(path: impl ToString, line: usize, message: impl ToString) -> Self {
        NashError::Parse {
            path: path.to_string(),
            line,
            message: message.to_string(),
        }
    }
}
