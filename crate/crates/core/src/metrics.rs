//! Perturbation curves, degradation scores and class-adjusted aggregates.
//!
//! All reductions (the degradation score itself, class means, the penalty and
//! the class-adjusted score) are carried out in exact rational arithmetic over
//! the `f64` inputs and rounded to nearest once at the end. Results are thus
//! independent of summation order and algebraic identities between them hold
//! exactly, e.g. `ds_c(0) == mean` and, for balanced binary records,
//! `ds_c(1) == min(class means)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::float::FloatCore;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::perturb::{rank_features, replacement_series, Direction, PerturbationSchedule, PerturbationStrategy};
use crate::predict::{predict_proba, Predictor};
use crate::types::{AttributionVector, ClassId, TimeSeries};

/// Exact sum of `f64` values as a fixed-point integer scaled by `2^1075`, the
/// smallest scale at which every finite double is an integer.
#[derive(Debug, Clone, Default, PartialEq)]
struct ExactSum {
    acc: BigInt,
}

const SCALE_BITS: usize = 1075;

impl ExactSum {
    fn add(&mut self, v: f64) {
        debug_assert!(v.is_finite());
        let (mantissa, exponent, sign) = v.integer_decode();
        let term = BigInt::from(mantissa) << (i32::from(exponent) + SCALE_BITS as i32) as usize;
        if sign < 0 {
            self.acc -= term;
        } else {
            self.acc += term;
        }
    }

    fn sub(&mut self, v: f64) {
        self.add(-v);
    }

    fn div(&self, n: usize) -> BigRational {
        BigRational::new(self.acc.clone(), (BigInt::one() << SCALE_BITS) * BigInt::from(n))
    }
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

/// Round to nearest, ties to even.
fn round(q: &BigRational) -> f64 {
    q.to_f64().expect("rational converts to f64")
}

/// Probability of the target class after each cumulative perturbation step.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCurve {
    pub series_id: String,
    pub strategy: PerturbationStrategy,
    pub method: String,
    pub direction: Direction,
    pub target_class: ClassId,
    pub series_length: usize,
    /// Features perturbed at each step (the schedule's cumulative counts).
    pub perturbed_counts: Vec<usize>,
    /// Probability before any perturbation. Plotting metadata only; not part
    /// of `probs`.
    pub initial_prob: f64,
    /// `probs[j]` is the target-class probability after
    /// `perturbed_counts[j]` features are perturbed.
    pub probs: Vec<f64>,
}

impl PerturbationCurve {
    pub fn m(&self) -> usize {
        self.probs.len()
    }

    pub fn fraction(&self, j: usize) -> f64 {
        self.perturbed_counts[j] as f64 / self.series_length as f64
    }
}

/// Target class of `r`, checked against the series' predicted class.
fn checked_target(x: &TimeSeries, r: &AttributionVector) -> Result<ClassId> {
    let predicted = x
        .predicted_class
        .ok_or_else(|| Error::MissingPrediction(x.id.clone()))?;
    if r.target_class() != predicted {
        return Err(Error::TargetMismatch {
            attributed: r.target_class(),
            predicted,
        });
    }
    if r.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: r.len(),
        });
    }
    Ok(predicted)
}

/// Curve for one instance, attribution, strategy and direction. Random
/// strategies draw their replacement vector from `seed`.
pub fn perturbation_curve<P: Predictor + ?Sized>(
    predictor: &P,
    x: &TimeSeries,
    r: &AttributionVector,
    strategy: &PerturbationStrategy,
    schedule: &PerturbationSchedule,
    direction: Direction,
    seed: u64,
) -> Result<PerturbationCurve> {
    checked_target(x, r)?;
    let replacement = replacement_series(strategy, &x.values, seed)?;
    perturbation_curve_with_replacement(predictor, x, r, strategy, &replacement, schedule, direction)
}

/// As [`perturbation_curve`] with a precomputed replacement vector, so that
/// MoRF and LeRF runs (and several attribution methods) share one draw.
///
/// The perturbed series is built incrementally: step `j` extends step `j-1`
/// by the next features of the ranking. All steps plus the unperturbed input
/// go to the predictor as one batch.
pub fn perturbation_curve_with_replacement<P: Predictor + ?Sized>(
    predictor: &P,
    x: &TimeSeries,
    r: &AttributionVector,
    strategy: &PerturbationStrategy,
    replacement: &[f64],
    schedule: &PerturbationSchedule,
    direction: Direction,
) -> Result<PerturbationCurve> {
    let class = checked_target(x, r)?;
    if schedule.series_length() != x.len() {
        return Err(Error::LengthMismatch {
            expected: schedule.series_length(),
            got: x.len(),
        });
    }
    if replacement.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: replacement.len(),
        });
    }
    if schedule.m() == 0 {
        return Err(Error::Empty("perturbation schedule"));
    }
    let order = rank_features(r, direction).order;
    let mut rows = Vec::with_capacity(schedule.m() + 1);
    rows.push(x.values.clone());
    let mut current = x.values.clone();
    let mut done = 0;
    for &count in schedule.cumulative_steps() {
        for &i in &order[done..count] {
            current[i] = replacement[i];
        }
        done = count;
        rows.push(current.clone());
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let probs = predict_proba(predictor, &refs).map_err(|source| {
        let step = match source {
            crate::error::PredictError::InvalidProbabilities { row, .. } => row,
            _ => 0,
        };
        Error::PredictAtStep { step, source }
    })?;
    let mut probs = probs.into_iter().map(|p| p.probs()[class]);
    let initial_prob = probs.next().expect("unperturbed row");
    Ok(PerturbationCurve {
        series_id: x.id.clone(),
        strategy: *strategy,
        method: r.method().into(),
        direction,
        target_class: class,
        series_length: x.len(),
        perturbed_counts: schedule.cumulative_steps().to_vec(),
        initial_prob,
        probs: probs.collect(),
    })
}

/// `(1/m) * sum_j (lerf[j] - morf[j])`, exactly rounded.
pub fn ds_from_probs(lerf: &[f64], morf: &[f64]) -> Result<f64> {
    if lerf.len() != morf.len() {
        return Err(Error::CurveMismatch(format!(
            "curve lengths differ: {} vs {}",
            lerf.len(),
            morf.len()
        )));
    }
    if lerf.is_empty() {
        return Err(Error::Empty("perturbation curve"));
    }
    if let Some(v) = lerf.iter().chain(morf).find(|v| !v.is_finite()) {
        return Err(Error::CurveMismatch(format!("non-finite probability {v}")));
    }
    let mut sum = ExactSum::default();
    for (l, m) in lerf.iter().zip(morf) {
        sum.add(*l);
        sum.sub(*m);
    }
    Ok(round(&sum.div(lerf.len())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRecord {
    pub series_id: String,
    pub strategy: PerturbationStrategy,
    pub method: String,
    pub predicted_class: ClassId,
    pub ds: f64,
}

/// Degradation score of one instance from its LeRF and MoRF curves.
pub fn degradation_score(lerf: &PerturbationCurve, morf: &PerturbationCurve) -> Result<DegradationRecord> {
    let mismatch = |what: &str| Err(Error::CurveMismatch(format!("{what} differs")));
    if lerf.series_id != morf.series_id {
        return mismatch("series id");
    }
    if lerf.strategy != morf.strategy {
        return mismatch("strategy");
    }
    if lerf.method != morf.method {
        return mismatch("method");
    }
    if lerf.target_class != morf.target_class {
        return mismatch("target class");
    }
    if lerf.perturbed_counts != morf.perturbed_counts {
        return mismatch("step schedule");
    }
    Ok(DegradationRecord {
        series_id: lerf.series_id.clone(),
        strategy: lerf.strategy,
        method: lerf.method.clone(),
        predicted_class: lerf.target_class,
        ds: ds_from_probs(&lerf.probs, &morf.probs)?,
    })
}

/// Per-class and overall degradation-score means, held exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSummary {
    total: ExactSum,
    n: usize,
    classes: BTreeMap<ClassId, (ExactSum, usize)>,
}

impl ClassSummary {
    /// Summary of `(predicted class, ds)` pairs.
    pub fn from_scores<I: IntoIterator<Item = (ClassId, f64)>>(scores: I) -> Result<Self> {
        let mut total = ExactSum::default();
        let mut n = 0;
        let mut classes: BTreeMap<ClassId, (ExactSum, usize)> = BTreeMap::new();
        for (class, ds) in scores {
            if !ds.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite degradation score {ds}")));
            }
            total.add(ds);
            n += 1;
            let entry = classes.entry(class).or_default();
            entry.0.add(ds);
            entry.1 += 1;
        }
        if n == 0 {
            return Err(Error::Empty("degradation records"));
        }
        Ok(Self { total, n, classes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mean over all records (instance mean).
    pub fn overall_mean(&self) -> f64 {
        round(&self.total.div(self.n))
    }

    pub fn class_means(&self) -> BTreeMap<ClassId, f64> {
        self.exact_class_means().map(|(c, m)| (c, round(&m))).collect()
    }

    pub fn counts(&self) -> BTreeMap<ClassId, usize> {
        self.classes.iter().map(|(&c, (_, n))| (c, *n)).collect()
    }

    /// Unweighted mean of the class means. Equals [`Self::overall_mean`] when
    /// classes are balanced.
    pub fn mean_of_class_means(&self) -> f64 {
        let sum = self
            .exact_class_means()
            .fold(BigRational::zero(), |acc, (_, m)| acc + m);
        round(&(sum / BigInt::from(self.classes.len())))
    }

    /// Whether every present class has the same number of records.
    pub fn is_balanced(&self) -> bool {
        let mut counts = self.classes.values().map(|(_, n)| *n);
        let first = counts.next();
        counts.all(|n| Some(n) == first)
    }

    pub fn penalty(&self) -> Result<f64> {
        let means: Vec<BigRational> = self.exact_class_means().map(|(_, m)| m).collect();
        Ok(round(&penalty_exact(&means)?))
    }

    /// `overall mean - alpha * penalty`.
    pub fn class_adjusted(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let mean = self.total.div(self.n);
        if alpha == 0.0 {
            return Ok(round(&mean));
        }
        let means: Vec<BigRational> = self.exact_class_means().map(|(_, m)| m).collect();
        Ok(round(&(mean - exact(alpha) * penalty_exact(&means)?)))
    }

    fn exact_class_means(&self) -> impl Iterator<Item = (ClassId, BigRational)> + '_ {
        self.classes.iter().map(|(&c, (sum, n))| (c, sum.div(*n)))
    }
}

/// Groups records by predicted class.
pub fn class_means(records: &[DegradationRecord]) -> Result<ClassSummary> {
    ClassSummary::from_scores(records.iter().map(|r| (r.predicted_class, r.ds)))
}

/// Mean absolute pairwise difference of the class means, halved:
/// `sum_{i<j} |d_i - d_j| / (C (C - 1))` over the classes present.
fn penalty_exact(means: &[BigRational]) -> Result<BigRational> {
    let c = means.len();
    if c < 2 {
        return Err(Error::PenaltyUndefined { present: c });
    }
    let mut sum = BigRational::zero();
    for (i, a) in means.iter().enumerate() {
        for b in &means[i + 1..] {
            sum += (a - b).abs();
        }
    }
    Ok(sum / BigInt::from(c * (c - 1)))
}

/// Class-difference penalty for any number of classes present in the map.
pub fn penalty(per_class_means: &BTreeMap<ClassId, f64>) -> Result<f64> {
    let means = per_class_means
        .values()
        .map(|&m| {
            if m.is_finite() {
                Ok(exact(m))
            } else {
                Err(Error::InvalidArgument(format!("non-finite class mean {m}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(round(&penalty_exact(&means)?))
}

/// Two-class penalty `|d_1 - d_0| / 2`.
pub fn penalty_binary(mean_0: f64, mean_1: f64) -> f64 {
    round(&((exact(mean_1) - exact(mean_0)).abs() / BigInt::from(2)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(())
}

/// `mean_ds - alpha * delta`, exactly rounded.
pub fn class_adjusted_ds(mean_ds: f64, delta: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !mean_ds.is_finite() || !delta.is_finite() {
        return Err(Error::InvalidArgument("mean and penalty must be finite".into()));
    }
    Ok(round(&(exact(mean_ds) - exact(alpha) * exact(delta))))
}

/// Aggregate of all records sharing one (method, strategy) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCell {
    pub method: String,
    pub strategy: PerturbationStrategy,
    pub n: usize,
    pub mean_ds: f64,
    pub mean_of_class_means: f64,
    pub balanced: bool,
    pub per_class_mean_ds: BTreeMap<ClassId, f64>,
    pub n_per_class: BTreeMap<ClassId, usize>,
    /// `None` when fewer than two classes are present.
    pub delta: Option<f64>,
    /// `(alpha, ds_c)` in the requested alpha order. `ds_c` is `None` when the
    /// penalty is undefined and `alpha > 0`.
    pub ds_c_by_alpha: Vec<(f64, Option<f64>)>,
}

impl AggregateCell {
    pub fn from_records(records: &[DegradationRecord], alphas: &[f64]) -> Result<Self> {
        let first = records.first().ok_or(Error::Empty("degradation records"))?;
        if records
            .iter()
            .any(|r| r.method != first.method || r.strategy != first.strategy)
        {
            return Err(Error::InvalidArgument(
                "records of one cell must share method and strategy".into(),
            ));
        }
        let summary = class_means(records)?;
        let delta = summary.penalty().ok();
        let ds_c_by_alpha = alphas
            .iter()
            .map(|&alpha| {
                let value = match summary.class_adjusted(alpha) {
                    Ok(v) => Some(v),
                    Err(Error::PenaltyUndefined { .. }) => None,
                    Err(e) => return Err(e),
                };
                Ok((alpha, value))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            method: first.method.clone(),
            strategy: first.strategy,
            n: summary.n(),
            mean_ds: summary.overall_mean(),
            mean_of_class_means: summary.mean_of_class_means(),
            balanced: summary.is_balanced(),
            per_class_mean_ds: summary.class_means(),
            n_per_class: summary.counts(),
            delta,
            ds_c_by_alpha,
        })
    }

    pub fn ds_c(&self, alpha: f64) -> Option<f64> {
        self.ds_c_by_alpha
            .iter()
            .find(|(a, _)| *a == alpha)
            .and_then(|(_, v)| *v)
    }
}

/// One cell per (method, strategy) pair, in order of first appearance.
pub fn aggregate(records: &[DegradationRecord], alphas: &[f64]) -> Result<Vec<AggregateCell>> {
    for &alpha in alphas {
        check_alpha(alpha)?;
    }
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut groups: Vec<Vec<DegradationRecord>> = Vec::new();
    for r in records {
        let key = (r.method.clone(), r.strategy.to_string());
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(r.clone()),
            None => {
                keys.push(key);
                groups.push(alloc::vec![r.clone()]);
            }
        }
    }
    groups.iter().map(|g| AggregateCell::from_records(g, alphas)).collect()
}
