//! Perturbation-based evaluation of feature attributions for univariate
//! time-series classifiers.
//!
//! An attribution ranks the time points of one series. Perturbing them in
//! most-relevant-first (MoRF) and least-relevant-first (LeRF) order traces two
//! probability curves for the predicted class; the degradation score is the
//! mean gap between them. Aggregating scores per predicted class exposes
//! class-dependent perturbation effects, which the class-adjusted score
//! penalizes.
//!
//! The crate is `no_std` with `alloc`. File formats, the external predictor
//! protocol and the command line live in the `tsape` crate.

#![no_std]

extern crate alloc;

pub mod attribute;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod perturb;
pub mod predict;
pub mod rng;
pub mod types;

pub use error::{Error, PredictError, Result};
pub use types::{
    predicted_class, validate_dataset, AttributionVector, ClassId, Dataset, ProbVector, Rule, TimeSeries, Violation,
};
