//! Shared domain types: labeled univariate series, datasets, attribution
//! vectors and probability vectors.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Dense class index in `0..C`.
pub type ClassId = usize;

/// Tolerance on the probability simplex (sum and per-entry bounds).
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// One univariate series. Fields are public so that invalid data can be
/// represented and reported by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub id: String,
    pub values: Vec<f64>,
    pub label: Option<ClassId>,
    pub predicted_class: Option<ClassId>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            values,
            label: None,
            predicted_class: None,
        }
    }

    pub fn with_label(mut self, label: ClassId) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_prediction(mut self, class: ClassId) -> Self {
        self.predicted_class = Some(class);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub n_classes: usize,
    pub series_length: usize,
    pub instances: Vec<TimeSeries>,
    pub class_counts: Vec<usize>,
    /// Original label token for each dense class id.
    pub label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, deriving `series_length` from the first instance and
    /// `class_counts` from the labels. No validation is performed.
    pub fn from_instances(
        name: impl Into<String>,
        n_classes: usize,
        instances: Vec<TimeSeries>,
        label_names: Vec<String>,
    ) -> Self {
        let series_length = instances.first().map_or(0, TimeSeries::len);
        let mut class_counts = vec![0; n_classes];
        for label in instances.iter().filter_map(|s| s.label) {
            if let Some(count) = class_counts.get_mut(label) {
                *count += 1;
            }
        }
        Self {
            name: name.into(),
            n_classes,
            series_length,
            instances,
            class_counts,
            label_names,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Instances carrying class `class` as their label, in dataset order.
    pub fn instances_of(&self, class: ClassId) -> impl Iterator<Item = &TimeSeries> {
        self.instances.iter().filter(move |s| s.label == Some(class))
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_dataset(self)
    }
}

/// The invariant a [`Violation`] breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    SeriesTooShort {
        len: usize,
    },
    TooFewClasses {
        n_classes: usize,
    },
    LengthMismatch {
        expected: usize,
        got: usize,
    },
    NonFiniteValue {
        position: usize,
    },
    LabelOutOfRange {
        label: ClassId,
    },
    PredictionOutOfRange {
        class: ClassId,
    },
    MissingClass {
        class: ClassId,
    },
    ClassCountMismatch {
        class: ClassId,
        recorded: usize,
        actual: usize,
    },
    ClassCountLength {
        recorded: usize,
        n_classes: usize,
    },
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::SeriesTooShort { len } => write!(f, "series length {len} is below 2"),
            Rule::TooFewClasses { n_classes } => write!(f, "{n_classes} classes declared, need at least 2"),
            Rule::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Rule::NonFiniteValue { position } => write!(f, "non-finite value at position {position}"),
            Rule::LabelOutOfRange { label } => write!(f, "label {label} out of range"),
            Rule::PredictionOutOfRange { class } => write!(f, "predicted class {class} out of range"),
            Rule::MissingClass { class } => write!(f, "class {class} has no instances"),
            Rule::ClassCountMismatch {
                class,
                recorded,
                actual,
            } => {
                write!(f, "class {class} count recorded as {recorded}, actual {actual}")
            }
            Rule::ClassCountLength { recorded, n_classes } => {
                write!(f, "class_counts has {recorded} entries for {n_classes} classes")
            }
        }
    }
}

/// One broken invariant. `instance` is `None` for dataset-level rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub instance: Option<String>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.instance {
            Some(id) => write!(f, "instance {id}: {}", self.rule),
            None => write!(f, "dataset: {}", self.rule),
        }
    }
}

/// Lists every broken dataset invariant; empty iff the dataset is valid.
/// Each instance contributes at most one non-finite violation (the first
/// offending position).
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let dataset_rule = |rule| Violation { instance: None, rule };
    if d.series_length < 2 {
        out.push(dataset_rule(Rule::SeriesTooShort { len: d.series_length }));
    }
    if d.n_classes < 2 {
        out.push(dataset_rule(Rule::TooFewClasses { n_classes: d.n_classes }));
    }
    let mut actual = vec![0usize; d.n_classes];
    for s in &d.instances {
        let mut push = |rule| {
            out.push(Violation {
                instance: Some(s.id.clone()),
                rule,
            })
        };
        if s.len() != d.series_length {
            push(Rule::LengthMismatch {
                expected: d.series_length,
                got: s.len(),
            });
        }
        if let Some(position) = s.values.iter().position(|v| !v.is_finite()) {
            push(Rule::NonFiniteValue { position });
        }
        if let Some(label) = s.label {
            match actual.get_mut(label) {
                Some(count) => *count += 1,
                None => push(Rule::LabelOutOfRange { label }),
            }
        }
        if let Some(class) = s.predicted_class {
            if class >= d.n_classes {
                push(Rule::PredictionOutOfRange { class });
            }
        }
    }
    for (class, &count) in actual.iter().enumerate() {
        if count == 0 {
            out.push(dataset_rule(Rule::MissingClass { class }));
        }
    }
    if d.class_counts.len() != d.n_classes {
        out.push(dataset_rule(Rule::ClassCountLength {
            recorded: d.class_counts.len(),
            n_classes: d.n_classes,
        }));
    } else {
        for (class, (&recorded, &actual)) in d.class_counts.iter().zip(&actual).enumerate() {
            if recorded != actual {
                out.push(dataset_rule(Rule::ClassCountMismatch {
                    class,
                    recorded,
                    actual,
                }));
            }
        }
    }
    out
}

/// Per-time-point relevance scores explaining `target_class` for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionVector {
    series_id: String,
    method: String,
    target_class: ClassId,
    scores: Vec<f64>,
}

impl AttributionVector {
    pub fn new(
        series_id: impl Into<String>,
        method: impl Into<String>,
        target_class: ClassId,
        scores: Vec<f64>,
        series_length: usize,
    ) -> Result<Self> {
        if scores.len() != series_length {
            return Err(Error::LengthMismatch {
                expected: series_length,
                got: scores.len(),
            });
        }
        if let Some(position) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(position));
        }
        Ok(Self {
            series_id: series_id.into(),
            method: method.into(),
            target_class,
            scores,
        })
    }

    pub fn series_id(&self) -> &str {
        &self.series_id
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn target_class(&self) -> ClassId {
        self.target_class
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// A point on the probability simplex over `C` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    /// Accepts rows within [`SIMPLEX_TOLERANCE`] of the simplex. Entries are
    /// clamped into `[0, 1]` and the row is divided by its sum unless the sum
    /// is already within rounding error of one, so normalizing twice is a
    /// no-op. Anything further off is rejected.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidProbabilities(format!("entry {i} is not finite")));
            }
            if !(-SIMPLEX_TOLERANCE..=1.0 + SIMPLEX_TOLERANCE).contains(&p) {
                return Err(Error::InvalidProbabilities(format!("entry {i} = {p} outside [0, 1]")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if libm::fabs(sum - 1.0) > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
        }
        for p in probs.iter_mut() {
            *p = p.clamp(0.0, 1.0);
        }
        let sum: f64 = probs.iter().sum();
        if libm::fabs(sum - 1.0) > 2.0 * probs.len() as f64 * f64::EPSILON {
            for p in probs.iter_mut() {
                *p = (*p / sum).min(1.0);
            }
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, class: ClassId) -> Option<f64> {
        self.probs.get(class).copied()
    }

    pub fn predicted_class(&self) -> ClassId {
        argmax(&self.probs).unwrap_or(0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predicted_class(probs: &[f64]) -> Result<ClassId> {
    argmax(probs).ok_or(Error::Empty("probability vector"))
}

fn argmax(values: &[f64]) -> Option<ClassId> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_nan() && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

impl fmt::Display for ProbVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.probs.iter().map(|p| p.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class(instances: Vec<TimeSeries>) -> Dataset {
        Dataset::from_instances("toy", 2, instances, vec!["0".into(), "1".into()])
    }

    #[test]
    fn valid_dataset_has_no_violations() {
        let d = two_class(vec![
            TimeSeries::new("a", vec![0.0, 1.0]).with_label(0),
            TimeSeries::new("b", vec![1.0, 0.0]).with_label(1),
        ]);
        assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn short_series_is_one_length_violation() {
        let d = two_class(vec![
            TimeSeries::new("a", vec![0.0, 1.0, 2.0]).with_label(0),
            TimeSeries::new("b", vec![1.0, 0.0]).with_label(1),
        ]);
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].instance.as_deref(), Some("b"));
        assert_eq!(v[0].rule, Rule::LengthMismatch { expected: 3, got: 2 });
    }

    #[test]
    fn nan_is_one_non_finite_violation() {
        let d = two_class(vec![
            TimeSeries::new("a", vec![f64::NAN, f64::NAN]).with_label(0),
            TimeSeries::new("b", vec![1.0, 0.0]).with_label(1),
        ]);
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::NonFiniteValue { position: 0 });
    }

    #[test]
    fn missing_class_and_bad_labels_are_reported() {
        let d = two_class(vec![
            TimeSeries::new("a", vec![0.0, 1.0]).with_label(0),
            TimeSeries::new("b", vec![1.0, 0.0]).with_label(5),
        ]);
        let rules: Vec<Rule> = validate_dataset(&d).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::LabelOutOfRange { label: 5 }));
        assert!(rules.contains(&Rule::MissingClass { class: 1 }));
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(predicted_class(&[0.2, 0.8]).unwrap(), 1);
        assert_eq!(predicted_class(&[0.5, 0.5]).unwrap(), 0);
        assert_eq!(predicted_class(&[0.1, 0.3, 0.6]).unwrap(), 2);
        assert_eq!(predicted_class(&[]), Err(Error::Empty("probability vector")));
    }

    #[test]
    fn prob_vector_tolerates_serialization_noise_only() {
        let p = ProbVector::new(vec![0.3, 0.7 + 5e-7]).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let p = ProbVector::new(vec![-1e-9, 1.0]).unwrap();
        assert_eq!(p.probs(), &[0.0, 1.0]);
        assert!(ProbVector::new(vec![0.3, 0.6]).is_err());
        for row in [
            vec![0.1, 0.2, 0.7 + 3e-7],
            vec![1.0 / 3.0; 3],
            vec![0.25 - 1e-8, 0.25, 0.25, 0.25],
        ] {
            let once = ProbVector::new(row).unwrap();
            let twice = ProbVector::new(once.probs().to_vec()).unwrap();
            assert_eq!(once, twice);
        }
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
    }

    #[test]
    fn attribution_length_is_enforced() {
        assert!(AttributionVector::new("a", "FO", 0, vec![0.0; 3], 3).is_ok());
        assert_eq!(
            AttributionVector::new("a", "FO", 0, vec![0.0; 2], 3),
            Err(Error::LengthMismatch { expected: 3, got: 2 })
        );
        assert_eq!(
            AttributionVector::new("a", "FO", 0, vec![0.0, f64::INFINITY], 2),
            Err(Error::NonFinite(1))
        );
    }
}
