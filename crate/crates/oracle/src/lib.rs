//! Brute-force reference implementations for the test suites.
//!
//! Nothing here is used by the evaluation pipeline. Each function recomputes
//! a pipeline result along an independent, deliberately naive route.

use itertools::Itertools;
use tsape_core::metrics::PerturbationCurve;
use tsape_core::perturb::{replacement_series, Direction, PerturbationSchedule, PerturbationStrategy};
use tsape_core::predict::{LogisticModel, Predictor};
use tsape_core::{AttributionVector, Error, PredictError, Result, TimeSeries};

/// Largest series length accepted by [`exhaustive_best_ds`].
pub const EXHAUSTIVE_MAX_LEN: usize = 8;

/// Predictor that ignores its input.
#[derive(Debug, Clone)]
pub struct ConstantPredictor {
    pub probs: Vec<f64>,
}

impl Predictor for ConstantPredictor {
    fn n_classes(&self) -> usize {
        self.probs.len()
    }

    fn series_length(&self) -> Option<usize> {
        None
    }

    fn describe(&self) -> String {
        format!("constant{:?}", self.probs)
    }

    fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
        Ok(batch.iter().map(|_| self.probs.clone()).collect())
    }
}

/// Selection-sort ranking: repeatedly take the unvisited index with the
/// largest (MoRF) or smallest (LeRF) score, lowest index on ties.
pub fn naive_rank(scores: &[f64], direction: Direction) -> Vec<usize> {
    let mut taken = vec![false; scores.len()];
    let mut order = Vec::with_capacity(scores.len());
    for _ in 0..scores.len() {
        let mut best: Option<usize> = None;
        for i in 0..scores.len() {
            if taken[i] {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => match direction {
                    Direction::MoRF => scores[i] > scores[b],
                    Direction::LeRF => scores[i] < scores[b],
                },
            };
            if better {
                best = Some(i);
            }
        }
        let b = best.expect("unvisited index");
        taken[b] = true;
        order.push(b);
    }
    order
}

fn probability<P: Predictor + ?Sized>(predictor: &P, x: &[f64], class: usize) -> Result<f64> {
    let rows = predictor.predict_rows(&[x])?;
    let row = rows.into_iter().next().ok_or(Error::Empty("predictor output"))?;
    let probs = tsape_core::ProbVector::new(row)?;
    Ok(probs.probs()[class])
}

/// Curve for an explicit perturbation order, rebuilding every perturbed
/// series from the original and querying the predictor one series at a time.
pub fn curve_for_order<P: Predictor + ?Sized>(
    predictor: &P,
    x: &[f64],
    class: usize,
    order: &[usize],
    replacement: &[f64],
    schedule: &PerturbationSchedule,
) -> Result<Vec<f64>> {
    if schedule.m() == 0 {
        return Err(Error::Empty("perturbation schedule"));
    }
    let mut probs = Vec::new();
    for &count in schedule.cumulative_steps() {
        let mut y = x.to_vec();
        for &i in &order[..count] {
            y[i] = replacement[i];
        }
        probs.push(probability(predictor, &y, class)?);
    }
    Ok(probs)
}

/// Reference for `metrics::perturbation_curve`.
pub fn brute_force_curve<P: Predictor + ?Sized>(
    predictor: &P,
    x: &TimeSeries,
    r: &AttributionVector,
    strategy: &PerturbationStrategy,
    schedule: &PerturbationSchedule,
    direction: Direction,
    seed: u64,
) -> Result<PerturbationCurve> {
    let class = x
        .predicted_class
        .ok_or_else(|| Error::MissingPrediction(x.id.clone()))?;
    if r.target_class() != class {
        return Err(Error::TargetMismatch {
            attributed: r.target_class(),
            predicted: class,
        });
    }
    if schedule.series_length() != x.len() || r.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: schedule.series_length(),
        });
    }
    let replacement = replacement_series(strategy, &x.values, seed)?;
    let order = naive_rank(r.scores(), direction);
    let probs = curve_for_order(predictor, &x.values, class, &order, &replacement, schedule)?;
    Ok(PerturbationCurve {
        series_id: x.id.clone(),
        strategy: *strategy,
        method: r.method().to_string(),
        direction,
        target_class: class,
        series_length: x.len(),
        perturbed_counts: schedule.cumulative_steps().to_vec(),
        initial_prob: probability(predictor, &x.values, class)?,
        probs,
    })
}

/// Plain floating-point degradation score.
pub fn naive_ds(lerf: &[f64], morf: &[f64]) -> f64 {
    lerf.iter().zip(morf).map(|(l, m)| l - m).sum::<f64>() / lerf.len() as f64
}

/// Largest degradation score over all `N!` rankings of a series of at most
/// [`EXHAUSTIVE_MAX_LEN`] points. A ranking with all scores distinct perturbs
/// in its own order under MoRF and in reverse under LeRF.
pub fn exhaustive_best_ds<P: Predictor + ?Sized>(
    predictor: &P,
    x: &TimeSeries,
    strategy: &PerturbationStrategy,
    schedule: &PerturbationSchedule,
    seed: u64,
) -> Result<f64> {
    let n = x.len();
    if n > EXHAUSTIVE_MAX_LEN {
        return Err(Error::InvalidArgument(format!(
            "exhaustive search supports at most {EXHAUSTIVE_MAX_LEN} points, got {n}"
        )));
    }
    let class = x
        .predicted_class
        .ok_or_else(|| Error::MissingPrediction(x.id.clone()))?;
    let replacement = replacement_series(strategy, &x.values, seed)?;
    let mut best = f64::NEG_INFINITY;
    for morf in (0..n).permutations(n) {
        let lerf: Vec<usize> = morf.iter().rev().copied().collect();
        let m = curve_for_order(predictor, &x.values, class, &morf, &replacement, schedule)?;
        let l = curve_for_order(predictor, &x.values, class, &lerf, &replacement, schedule)?;
        best = best.max(naive_ds(&l, &m));
    }
    Ok(best)
}

/// Analytic `d q_c / d x` for a logistic model:
/// `q_c * (w_c - sum_j q_j w_j)`.
pub fn logistic_gradient(model: &LogisticModel, x: &[f64], class: usize) -> Vec<f64> {
    let logits: Vec<f64> = model
        .weights()
        .iter()
        .zip(model.biases())
        .map(|(w, b)| w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let q: Vec<f64> = exps.iter().map(|e| e / total).collect();
    (0..x.len())
        .map(|k| {
            let mixed: f64 = q.iter().zip(model.weights()).map(|(qj, w)| qj * w[k]).sum();
            q[class] * (model.weights()[class][k] - mixed)
        })
        .collect()
}

/// Index whose single-point replacement by `value` lowers `q_class` the most
/// (lowest index on ties).
pub fn best_single_occlusion<P: Predictor + ?Sized>(
    predictor: &P,
    x: &[f64],
    class: usize,
    value: f64,
) -> Result<usize> {
    let base = probability(predictor, x, class)?;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..x.len() {
        let mut y = x.to_vec();
        y[i] = value;
        let drop = base - probability(predictor, &y, class)?;
        if drop > best.1 {
            best = (i, drop);
        }
    }
    Ok(best.0)
}
