use alloc::string::String;

use thiserror::Error;

use crate::types::ClassId;

/// Failure reported by a predictor or by the checks applied to its output.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("series length mismatch: predictor expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("predictor returned {got} rows for a batch of {expected}")]
    RowCount { expected: usize, got: usize },
    #[error("predictor returned {got} classes, expected {expected}")]
    ClassCount { expected: usize, got: usize },
    #[error("invalid probability row {row}: {reason}")]
    InvalidProbabilities { row: usize, reason: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("remote predictor error: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("classification needs at least two distinct labels, found {found}")]
    TooFewClasses { found: usize },
    #[error("class {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: ClassId, n_classes: usize },
    #[error("class {0} has no instances")]
    EmptyClass(ClassId),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("index {index} out of range for series of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("attribution targets class {attributed} but the predicted class is {predicted}")]
    TargetMismatch { attributed: ClassId, predicted: ClassId },
    #[error("series {0} has no predicted class")]
    MissingPrediction(String),
    #[error("curves are not comparable: {0}")]
    CurveMismatch(String),
    #[error("penalty needs at least two classes, {present} present")]
    PenaltyUndefined { present: usize },
    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("training diverged (loss = {loss}); try a smaller learning rate")]
    Diverged { loss: f64 },
    #[error("predictor failure: {0}")]
    Predict(#[from] PredictError),
    #[error("predictor failure at perturbation step {step}: {source}")]
    PredictAtStep { step: usize, source: PredictError },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
