//! Black-box attribution methods: feature occlusion and central-difference
//! gradients.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::predict::{predict_proba, Predictor};
use crate::types::{AttributionVector, ClassId, TimeSeries};

pub const OCCLUSION_METHOD: &str = "FO";
pub const FD_GRADIENT_METHOD: &str = "GR-fd";
pub const FD_GRADIENT_ABS_METHOD: &str = "GR-fd-abs";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionParams {
    /// Window length in time points.
    pub window: usize,
    /// Value written into the occluded window.
    pub value: f64,
}

impl Default for OcclusionParams {
    fn default() -> Self {
        Self { window: 1, value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdParams {
    pub epsilon: f64,
    /// Report `|r_i|` instead of the signed difference.
    pub abs: bool,
}

impl Default for FdParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            abs: false,
        }
    }
}

fn check_class<P: Predictor + ?Sized>(predictor: &P, class: ClassId) -> Result<()> {
    let n_classes = predictor.n_classes();
    if class >= n_classes {
        return Err(Error::ClassOutOfRange { class, n_classes });
    }
    Ok(())
}

/// Time points covered by the occlusion window for position `i`: `window`
/// points centred on `i` (left of centre for even lengths), shifted to stay
/// inside the series. Windows of at least `n` points cover the whole series.
pub fn occlusion_window(i: usize, window: usize, n: usize) -> core::ops::Range<usize> {
    let len = window.min(n);
    let start = i.saturating_sub((len - 1) / 2).min(n - len);
    start..start + len
}

/// `r_i = q_c(x) - q_c(x with the window around i set to value)`.
pub fn occlusion_attribution<P: Predictor + ?Sized>(
    predictor: &P,
    x: &TimeSeries,
    class: ClassId,
    params: &OcclusionParams,
) -> Result<AttributionVector> {
    check_class(predictor, class)?;
    if params.window == 0 {
        return Err(Error::InvalidArgument("occlusion window must be at least 1".into()));
    }
    if !params.value.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "occlusion value {} is not finite",
            params.value
        )));
    }
    let n = x.len();
    if n == 0 {
        return Err(Error::Empty("series"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push(x.values.clone());
    for i in 0..n {
        let mut y = x.values.clone();
        for v in &mut y[occlusion_window(i, params.window, n)] {
            *v = params.value;
        }
        rows.push(y);
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let probs = predict_proba(predictor, &refs)?;
    let base = probs[0].probs()[class];
    let scores = probs[1..].iter().map(|p| base - p.probs()[class]).collect();
    AttributionVector::new(x.id.clone(), OCCLUSION_METHOD, class, scores, n)
}

/// `r_i = (q_c(x + eps e_i) - q_c(x - eps e_i)) / (2 eps)`.
pub fn fd_gradient_attribution<P: Predictor + ?Sized>(
    predictor: &P,
    x: &TimeSeries,
    class: ClassId,
    params: &FdParams,
) -> Result<AttributionVector> {
    check_class(predictor, class)?;
    let eps = params.epsilon;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} must be positive")));
    }
    let n = x.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * n);
    for i in 0..n {
        for delta in [eps, -eps] {
            let mut y = x.values.clone();
            y[i] += delta;
            rows.push(y);
        }
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let probs = predict_proba(predictor, &refs)?;
    let scores = probs
        .chunks_exact(2)
        .map(|pair| {
            let r = (pair[0].probs()[class] - pair[1].probs()[class]) / (2.0 * eps);
            if params.abs {
                libm::fabs(r)
            } else {
                r
            }
        })
        .collect();
    let method = if params.abs {
        FD_GRADIENT_ABS_METHOD
    } else {
        FD_GRADIENT_METHOD
    };
    AttributionVector::new(x.id.clone(), method, class, scores, n)
}
