//! Closed-form model behind the mock predictor server, plus fault injection
//! for protocol tests.

use std::sync::atomic::{AtomicUsize, Ordering};

use tsape_core::predict::{CentroidModel, Predictor};
use tsape_core::PredictError;

/// Nearest-centroid model whose class-`k` centroid is the constant vector
/// `k / (C - 1)`.
pub fn mock_model(n_classes: usize, series_length: usize, temperature: f64) -> CentroidModel {
    let centroids = (0..n_classes)
        .map(|k| vec![k as f64 / (n_classes - 1) as f64; series_length])
        .collect();
    CentroidModel::new(centroids, temperature).expect("valid mock parameters")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Rows that do not sum to one.
    OffSimplex,
    /// Fail every request after the first `n` with a model error.
    FailAfter(usize),
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "none" => Ok(Fault::None),
            None if s == "off-simplex" => Ok(Fault::OffSimplex),
            Some(("fail-after", n)) => n.parse().map(Fault::FailAfter).map_err(|e| format!("{s}: {e}")),
            _ => Err(format!("unknown fault {s:?} (none, off-simplex, fail-after:<n>)")),
        }
    }
}

/// Wraps a model and misbehaves as configured.
pub struct Faulty<P> {
    pub inner: P,
    pub fault: Fault,
    pub batch_limit: usize,
    calls: AtomicUsize,
}

impl<P> Faulty<P> {
    pub fn new(inner: P, fault: Fault, batch_limit: usize) -> Self {
        Self {
            inner,
            fault,
            batch_limit,
            calls: AtomicUsize::new(0),
        }
    }
}

impl<P: Predictor> Predictor for Faulty<P> {
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    fn series_length(&self) -> Option<usize> {
        self.inner.series_length()
    }

    fn batch_limit(&self) -> usize {
        self.batch_limit
    }

    fn describe(&self) -> String {
        format!("{} with fault {:?}", self.inner.describe(), self.fault)
    }

    fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        match self.fault {
            Fault::FailAfter(n) if call >= n => Err(PredictError::Remote(format!("model failure on call {call}"))),
            Fault::OffSimplex => Ok(batch.iter().map(|_| vec![0.9; self.inner.n_classes()]).collect()),
            _ => self.inner.predict_rows(batch),
        }
    }
}
