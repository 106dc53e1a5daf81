use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Top-level failure of a command, grouped by exit status.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("predictor error: {0}")]
    Predictor(String),
    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
}

impl RunError {
    /// 1 configuration, 2 data, 3 predictor or transport. Unwritable output
    /// locations count as configuration errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Output { .. } => 1,
            RunError::Data(_) => 2,
            RunError::Predictor(_) => 3,
        }
    }

    /// Core failure observed while processing one instance.
    pub fn at_instance(id: &str, err: tsape_core::Error) -> Self {
        match err {
            tsape_core::Error::Predict(_) | tsape_core::Error::PredictAtStep { .. } => {
                RunError::Predictor(format!("instance {id}: {err}"))
            }
            _ => RunError::Data(format!("instance {id}: {err}")),
        }
    }

    pub fn output(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| RunError::Output { path, source }
    }
}

impl From<tsape_core::PredictError> for RunError {
    fn from(e: tsape_core::PredictError) -> Self {
        RunError::Predictor(e.to_string())
    }
}
