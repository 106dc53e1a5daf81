//! Command-line harness around `tsape-core`: dataset and attribution files,
//! the external predictor protocol, run configuration, parallel execution and
//! result files.

pub mod attrfile;
pub mod commands;
pub mod config;
pub mod demo;
pub mod error;
pub mod formats;
pub mod mock;
pub mod protocol;
pub mod report;
pub mod runner;

pub use error::RunError;
