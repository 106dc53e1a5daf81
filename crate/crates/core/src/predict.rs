//! Black-box predictor contract and two small built-in classifiers.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, PredictError, Result};
use crate::types::{ClassId, Dataset, ProbVector};

/// A classifier mapping a batch of series to class probabilities.
///
/// Implementations return raw rows; callers go through [`predict_proba`],
/// which chunks batches and checks every row against the simplex.
pub trait Predictor {
    fn n_classes(&self) -> usize;

    /// Expected series length, if the predictor fixes one.
    fn series_length(&self) -> Option<usize>;

    /// Largest batch accepted per call.
    fn batch_limit(&self) -> usize {
        usize::MAX
    }

    fn describe(&self) -> String;

    fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError>;
}

macro_rules! forward_predictor {
    ($($ptr:ty),*) => {$(
        impl<P: Predictor + ?Sized> Predictor for $ptr {
            fn n_classes(&self) -> usize {
                (**self).n_classes()
            }
            fn series_length(&self) -> Option<usize> {
                (**self).series_length()
            }
            fn batch_limit(&self) -> usize {
                (**self).batch_limit()
            }
            fn describe(&self) -> String {
                (**self).describe()
            }
            fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
                (**self).predict_rows(batch)
            }
        }
    )*};
}

forward_predictor!(&P, Box<P>, Arc<P>);

/// Evaluates `batch` in chunks of at most `batch_limit` rows and validates the
/// output: one row per input, `C` entries each, on the probability simplex.
pub fn predict_proba<P: Predictor + ?Sized>(predictor: &P, batch: &[&[f64]]) -> Result<Vec<ProbVector>, PredictError> {
    if let Some(expected) = predictor.series_length() {
        if let Some(bad) = batch.iter().find(|row| row.len() != expected) {
            return Err(PredictError::DimensionMismatch {
                expected,
                got: bad.len(),
            });
        }
    }
    let n_classes = predictor.n_classes();
    let limit = predictor.batch_limit().max(1);
    let mut out = Vec::with_capacity(batch.len());
    for chunk in batch.chunks(limit) {
        let rows = predictor.predict_rows(chunk)?;
        if rows.len() != chunk.len() {
            return Err(PredictError::RowCount {
                expected: chunk.len(),
                got: rows.len(),
            });
        }
        for row in rows {
            if row.len() != n_classes {
                return Err(PredictError::ClassCount {
                    expected: n_classes,
                    got: row.len(),
                });
            }
            let index = out.len();
            let p = ProbVector::new(row).map_err(|e| PredictError::InvalidProbabilities {
                row: index,
                reason: e.to_string(),
            })?;
            out.push(p);
        }
    }
    Ok(out)
}

pub fn predict_one<P: Predictor + ?Sized>(predictor: &P, x: &[f64]) -> Result<ProbVector, PredictError> {
    Ok(predict_proba(predictor, &[x])?.remove(0))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(logits.iter().map(|l| libm::exp(l - max)).sum::<f64>())
}

fn check_dims(expected: usize, batch: &[&[f64]]) -> Result<(), PredictError> {
    match batch.iter().find(|row| row.len() != expected) {
        Some(bad) => Err(PredictError::DimensionMismatch {
            expected,
            got: bad.len(),
        }),
        None => Ok(()),
    }
}

/// Nearest-centroid classifier with probabilities
/// `softmax(-||x - centroid_c||^2 / temperature)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    centroids: Vec<Vec<f64>>,
    temperature: f64,
}

impl CentroidModel {
    pub fn new(centroids: Vec<Vec<f64>>, temperature: f64) -> Result<Self> {
        if centroids.len() < 2 {
            return Err(Error::TooFewClasses { found: centroids.len() });
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature {temperature} must be positive"
            )));
        }
        let n = centroids[0].len();
        if let Some(bad) = centroids.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self { centroids, temperature })
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.centroids
            .iter()
            .map(|c| {
                let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                -d2 / self.temperature
            })
            .collect()
    }
}

impl Predictor for CentroidModel {
    fn n_classes(&self) -> usize {
        self.centroids.len()
    }

    fn series_length(&self) -> Option<usize> {
        Some(self.centroids[0].len())
    }

    fn describe(&self) -> String {
        format!(
            "builtin-centroid(classes={}, length={}, temperature={})",
            self.centroids.len(),
            self.centroids[0].len(),
            self.temperature
        )
    }

    fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
        check_dims(self.centroids[0].len(), batch)?;
        Ok(batch.iter().map(|x| softmax(&self.logits(x))).collect())
    }
}

/// Per-class mean of the labeled instances.
pub fn fit_centroid(d: &Dataset, temperature: f64) -> Result<CentroidModel> {
    let n = d.series_length;
    let mut sums = vec![vec![0.0; n]; d.n_classes];
    let mut counts = vec![0usize; d.n_classes];
    for s in &d.instances {
        let Some(label) = s.label else { continue };
        if label >= d.n_classes {
            return Err(Error::ClassOutOfRange {
                class: label,
                n_classes: d.n_classes,
            });
        }
        if s.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: s.len(),
            });
        }
        for (acc, v) in sums[label].iter_mut().zip(&s.values) {
            *acc += v;
        }
        counts[label] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(empty));
    }
    let centroids = sums
        .into_iter()
        .zip(&counts)
        .map(|(sum, &count)| sum.into_iter().map(|v| v / count as f64).collect())
        .collect();
    CentroidModel::new(centroids, temperature)
}

/// Multinomial logistic regression, `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    training_loss: Option<f64>,
}

impl LogisticModel {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::TooFewClasses { found: weights.len() });
        }
        if biases.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: weights.len(),
                got: biases.len(),
            });
        }
        let n = weights[0].len();
        if let Some(bad) = weights.iter().find(|w| w.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        if weights.iter().flatten().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("logistic parameters must be finite".into()));
        }
        Ok(Self {
            weights,
            biases,
            training_loss: None,
        })
    }

    pub fn zeros(n_classes: usize, series_length: usize) -> Result<Self> {
        Self::new(vec![vec![0.0; series_length]; n_classes], vec![0.0; n_classes])
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Mean cross-entropy on the training data after the last epoch.
    pub fn training_loss(&self) -> Option<f64> {
        self.training_loss
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    /// Mean multinomial cross-entropy over the labeled instances of `d`.
    pub fn cross_entropy(&self, d: &Dataset) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for s in &d.instances {
            let Some(label) = s.label else { continue };
            let logits = self.logits(&s.values);
            total += log_sum_exp(&logits) - logits[label];
            n += 1;
        }
        total / n as f64
    }
}

impl Predictor for LogisticModel {
    fn n_classes(&self) -> usize {
        self.weights.len()
    }

    fn series_length(&self) -> Option<usize> {
        Some(self.weights[0].len())
    }

    fn describe(&self) -> String {
        format!(
            "builtin-logistic(classes={}, length={})",
            self.weights.len(),
            self.weights[0].len()
        )
    }

    fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
        check_dims(self.weights[0].len(), batch)?;
        Ok(batch.iter().map(|x| softmax(&self.logits(x))).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Recorded for provenance. Initialization is all-zeros and descent is
    /// full-batch, so training does not consume randomness.
    pub seed: u64,
}

impl Default for LogisticFit {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

/// Full-batch gradient descent on mean multinomial cross-entropy from an
/// all-zeros initialization.
pub fn fit_logistic(d: &Dataset, fit: &LogisticFit) -> Result<LogisticModel> {
    if !(fit.learning_rate > 0.0 && fit.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate {} must be positive",
            fit.learning_rate
        )));
    }
    let labeled: Vec<(&[f64], ClassId)> = d
        .instances
        .iter()
        .filter_map(|s| s.label.map(|l| (s.values.as_slice(), l)))
        .collect();
    if labeled.is_empty() {
        return Err(Error::Empty("labeled training instances"));
    }
    let n = d.series_length;
    let c = d.n_classes;
    for &(x, label) in &labeled {
        if x.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if label >= c {
            return Err(Error::ClassOutOfRange {
                class: label,
                n_classes: c,
            });
        }
    }
    let mut model = LogisticModel::zeros(c, n)?;
    let scale = fit.learning_rate / labeled.len() as f64;
    for _ in 0..fit.epochs {
        let mut grad_w = vec![vec![0.0; n]; c];
        let mut grad_b = vec![0.0; c];
        let mut loss = 0.0;
        for &(x, label) in &labeled {
            let logits = model.logits(x);
            loss += log_sum_exp(&logits) - logits[label];
            for (k, p) in softmax(&logits).into_iter().enumerate() {
                let g = p - if k == label { 1.0 } else { 0.0 };
                grad_b[k] += g;
                for (gw, xi) in grad_w[k].iter_mut().zip(x) {
                    *gw += g * xi;
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::Diverged {
                loss: loss / labeled.len() as f64,
            });
        }
        for k in 0..c {
            model.biases[k] -= scale * grad_b[k];
            for (w, g) in model.weights[k].iter_mut().zip(&grad_w[k]) {
                *w -= scale * g;
            }
        }
    }
    let loss = model.cross_entropy(d);
    if !loss.is_finite() || model.weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::Diverged { loss });
    }
    model.training_loss = Some(loss);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DetRng;
    use crate::types::TimeSeries;

    fn blobs(per_class: usize, separation: f64, noise: f64, seed: u64) -> Dataset {
        let mut rng = DetRng::new(seed);
        let mut instances = Vec::new();
        for class in 0..2 {
            for i in 0..per_class {
                let values = (0..8)
                    .map(|t| {
                        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                        let centre = if class == 0 { -separation } else { separation } * sign;
                        centre + noise * rng.standard_normal()
                    })
                    .collect();
                instances.push(TimeSeries::new(format!("{class}-{i}"), values).with_label(class));
            }
        }
        Dataset::from_instances("blobs", 2, instances, vec!["0".into(), "1".into()])
    }

    fn accuracy<P: Predictor>(p: &P, d: &Dataset) -> f64 {
        let rows: Vec<&[f64]> = d.instances.iter().map(|s| s.values.as_slice()).collect();
        let probs = predict_proba(p, &rows).unwrap();
        let correct = probs
            .iter()
            .zip(&d.instances)
            .filter(|(p, s)| Some(p.predicted_class()) == s.label)
            .count();
        correct as f64 / d.len() as f64
    }

    #[test]
    fn centroid_of_single_instances_is_the_instance() {
        let d = Dataset::from_instances(
            "two",
            2,
            vec![
                TimeSeries::new("a", vec![1.0, 2.0]).with_label(0),
                TimeSeries::new("b", vec![3.0, -1.0]).with_label(1),
            ],
            vec![],
        );
        let m = fit_centroid(&d, 1.0).unwrap();
        assert_eq!(m.centroids(), &[vec![1.0, 2.0], vec![3.0, -1.0]]);
    }

    #[test]
    fn centroid_limits() {
        let m = CentroidModel::new(vec![vec![0.0, 0.0], vec![2.0, 2.0]], 0.01).unwrap();
        let p = predict_one(&m, &[0.0, 0.0]).unwrap();
        assert!(p.probs()[0] > 1.0 - 1e-12);
        let p = predict_one(&m, &[1.0, 1.0]).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn centroid_needs_every_class() {
        let d = Dataset::from_instances(
            "one",
            2,
            vec![TimeSeries::new("a", vec![1.0, 2.0]).with_label(0)],
            vec![],
        );
        assert_eq!(fit_centroid(&d, 1.0), Err(Error::EmptyClass(1)));
    }

    #[test]
    fn centroid_separates_blobs() {
        let d = blobs(50, 3.0, 0.2, 1);
        let m = fit_centroid(&d, 1.0).unwrap();
        assert_eq!(accuracy(&m, &d), 1.0);
    }

    #[test]
    fn zero_logistic_is_uniform() {
        let m = LogisticModel::zeros(3, 4).unwrap();
        let p = predict_one(&m, &[1.0, -2.0, 3.0, 0.5]).unwrap();
        for &q in p.probs() {
            assert!((q - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let d = blobs(5, 1.0, 0.1, 2);
        let fit = LogisticFit {
            epochs: 0,
            ..LogisticFit::default()
        };
        let m = fit_logistic(&d, &fit).unwrap();
        assert!(m.weights().iter().flatten().all(|&w| w == 0.0));
        assert_eq!(predict_one(&m, &d.instances[0].values).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn logistic_learns_separable_data_and_reduces_loss() {
        let d = blobs(40, 1.0, 0.3, 3);
        let init = LogisticModel::zeros(2, 8).unwrap().cross_entropy(&d);
        let m = fit_logistic(&d, &LogisticFit::default()).unwrap();
        assert!(accuracy(&m, &d) >= 0.95);
        assert!(m.training_loss().unwrap() < init);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let d = blobs(10, 1e150, 0.0, 4);
        let fit = LogisticFit {
            epochs: 5,
            learning_rate: 1e300,
            seed: 0,
        };
        assert!(matches!(fit_logistic(&d, &fit), Err(Error::Diverged { .. })));
    }

    #[test]
    fn batch_of_three_sums_to_one() {
        let m = CentroidModel::new(vec![vec![0.0; 3], vec![1.0; 3], vec![-1.0; 3]], 0.5).unwrap();
        let rows: [&[f64]; 3] = [&[0.1, 0.2, 0.3], &[1.0, 1.0, 0.0], &[-2.0, 0.0, 5.0]];
        let probs = predict_proba(&m, &rows).unwrap();
        assert_eq!(probs.len(), 3);
        for p in probs {
            assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = LogisticModel::zeros(2, 3).unwrap();
        assert_eq!(
            predict_proba(&m, &[&[1.0, 2.0]]),
            Err(PredictError::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    struct Limited<'a>(&'a CentroidModel, core::cell::Cell<usize>);

    impl Predictor for Limited<'_> {
        fn n_classes(&self) -> usize {
            self.0.n_classes()
        }
        fn series_length(&self) -> Option<usize> {
            self.0.series_length()
        }
        fn batch_limit(&self) -> usize {
            2
        }
        fn describe(&self) -> String {
            "limited".into()
        }
        fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
            assert!(batch.len() <= 2);
            self.1.set(self.1.get() + 1);
            self.0.predict_rows(batch)
        }
    }

    #[test]
    fn chunked_batches_match_one_batch() {
        let m = CentroidModel::new(vec![vec![0.0; 2], vec![1.0; 2]], 0.3).unwrap();
        let limited = Limited(&m, core::cell::Cell::new(0));
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.2, 0.5]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        assert_eq!(
            predict_proba(&limited, &refs).unwrap(),
            predict_proba(&m, &refs).unwrap()
        );
        assert_eq!(limited.1.get(), 3);
    }

    struct Broken(Vec<f64>);

    impl Predictor for Broken {
        fn n_classes(&self) -> usize {
            2
        }
        fn series_length(&self) -> Option<usize> {
            None
        }
        fn describe(&self) -> String {
            "broken".into()
        }
        fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
            Ok(batch.iter().map(|_| self.0.clone()).collect())
        }
    }

    #[test]
    fn off_simplex_rows_are_errors_not_renormalized() {
        let err = predict_proba(&Broken(vec![0.2, 0.2]), &[&[1.0]]).unwrap_err();
        assert!(matches!(err, PredictError::InvalidProbabilities { row: 0, .. }));
        let err = predict_proba(&Broken(vec![1.0]), &[&[1.0]]).unwrap_err();
        assert_eq!(err, PredictError::ClassCount { expected: 2, got: 1 });
        let ok = predict_proba(&Broken(vec![0.4, 0.6 + 1e-7]), &[&[1.0]]).unwrap();
        assert!((ok[0].probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
