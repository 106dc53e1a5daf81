//! Perturbation strategies, feature ranking and the cumulative step schedule.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::mean_std;
use crate::rng::DetRng;
use crate::types::AttributionVector;

/// Default SubMean window as a fraction of the series length.
pub const SUBMEAN_DEFAULT_FRACTION: f64 = 0.1;

/// Replacement values of the constant grid.
pub const CONSTANT_GRID: [f64; 9] = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];

/// How replacement values are produced for perturbed time points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationStrategy {
    /// Draw from N(mean(x), std(x)).
    Gauss,
    /// Draw from U(min(x), max(x)).
    Unif,
    /// Flip sign.
    Opp,
    /// Reflect around the maximum: `max(x) - x_i`.
    Inv,
    /// Trailing-window mean of the original values.
    SubMean {
        window_fraction: f64,
    },
    Zero,
    Constant(f64),
}

impl PerturbationStrategy {
    pub fn sub_mean(window_fraction: f64) -> Result<Self> {
        if !(window_fraction > 0.0 && window_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "submean window fraction {window_fraction} outside (0, 1]"
            )));
        }
        Ok(Self::SubMean { window_fraction })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("constant value {value} is not finite")));
        }
        // -0.0 and 0.0 must fill identical vectors
        Ok(Self::Constant(if value == 0.0 { 0.0 } else { value }))
    }

    pub fn constant_grid() -> Vec<Self> {
        CONSTANT_GRID.iter().map(|&c| Self::Constant(c)).collect()
    }

    /// The six named strategies with default parameters (no constants).
    pub fn named() -> Vec<Self> {
        vec![
            Self::Gauss,
            Self::Unif,
            Self::Opp,
            Self::Inv,
            Self::SubMean {
                window_fraction: SUBMEAN_DEFAULT_FRACTION,
            },
            Self::Zero,
        ]
    }

    pub fn is_random(&self) -> bool {
        matches!(self, Self::Gauss | Self::Unif)
    }
}

impl fmt::Display for PerturbationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gauss => f.write_str("gauss"),
            Self::Unif => f.write_str("unif"),
            Self::Opp => f.write_str("opp"),
            Self::Inv => f.write_str("inv"),
            Self::SubMean { window_fraction } if *window_fraction == SUBMEAN_DEFAULT_FRACTION => f.write_str("submean"),
            Self::SubMean { window_fraction } => write!(f, "submean:{window_fraction}"),
            Self::Zero => f.write_str("zero"),
            Self::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

impl FromStr for PerturbationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |a: &str| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("strategy {s:?}: {a:?} is not a number")))
        };
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("gauss", None) => Ok(Self::Gauss),
            ("unif", None) => Ok(Self::Unif),
            ("opp", None) => Ok(Self::Opp),
            ("inv", None) => Ok(Self::Inv),
            ("zero", None) => Ok(Self::Zero),
            ("submean", None) => Self::sub_mean(SUBMEAN_DEFAULT_FRACTION),
            ("submean", Some(k)) => Self::sub_mean(number(k)?),
            ("constant", Some(c)) => Self::constant(number(c)?),
            _ => Err(Error::InvalidArgument(format!("unknown strategy {s:?}"))),
        }
    }
}

/// Static description of one strategy kind, for listings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub rule: &'static str,
    pub parameters: &'static str,
}

pub const STRATEGY_CATALOG: [StrategyInfo; 7] = [
    StrategyInfo {
        name: "gauss",
        description: "random noise from a distribution",
        rule: "x'_i ~ N(mean(x), std(x)), population std; one draw per point",
        parameters: "seeded per instance; std(x) = 0 is rejected",
    },
    StrategyInfo {
        name: "unif",
        description: "random values within range",
        rule: "x'_i ~ U(min(x), max(x)); one draw per point",
        parameters: "seeded per instance",
    },
    StrategyInfo {
        name: "opp",
        description: "flip sign",
        rule: "x'_i = -x_i",
        parameters: "none",
    },
    StrategyInfo {
        name: "inv",
        description: "invert around maximum",
        rule: "x'_i = max(x) - x_i",
        parameters: "none",
    },
    StrategyInfo {
        name: "submean",
        description: "local subsequence average",
        rule: "x'_i = mean(x_j : max(0, i-L+1) <= j <= i), L = ceil(k*N)",
        parameters: "k = 0.1 by default; write submean:<k> for another fraction",
    },
    StrategyInfo {
        name: "zero",
        description: "replace with zero",
        rule: "x'_i = 0",
        parameters: "none",
    },
    StrategyInfo {
        name: "constant",
        description: "replace with a predefined value",
        rule: "x'_i = c",
        parameters: "constant:<c>; constant-grid expands to c in {-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2}",
    },
];

/// `ceil(fraction * n)`, treating products within 1e-9 (relative) of an
/// integer as that integer so that e.g. `0.07 * 100` yields 7, not 8.
pub(crate) fn ceil_fraction(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let r = libm::round(x);
    if libm::fabs(x - r) <= 1e-9 * x.max(1.0) {
        r as usize
    } else {
        libm::ceil(x) as usize
    }
}

/// Full-length replacement vector computed from the original values.
///
/// Random strategies draw one value per time point, in index order, from a
/// [`DetRng`] seeded with `seed`; deterministic strategies ignore the seed.
pub fn replacement_series(strategy: &PerturbationStrategy, x: &[f64], seed: u64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("series"));
    }
    if let Some(position) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(position));
    }
    let n = x.len();
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(match *strategy {
        PerturbationStrategy::Gauss => {
            let (mean, std) = mean_std(x);
            if std == 0.0 {
                return Err(Error::Degenerate(
                    "gauss perturbation needs a series with nonzero standard deviation".into(),
                ));
            }
            let mut rng = DetRng::new(seed);
            (0..n).map(|_| mean + std * rng.standard_normal()).collect()
        }
        PerturbationStrategy::Unif => {
            let mut rng = DetRng::new(seed);
            (0..n).map(|_| min + (max - min) * rng.unit()).collect()
        }
        PerturbationStrategy::Opp => x.iter().map(|v| -v).collect(),
        PerturbationStrategy::Inv => x.iter().map(|v| max - v).collect(),
        PerturbationStrategy::SubMean { window_fraction } => {
            let len = ceil_fraction(window_fraction, n).clamp(1, n);
            (0..n)
                .map(|i| {
                    let window = &x[(i + 1).saturating_sub(len)..=i];
                    window.iter().sum::<f64>() / window.len() as f64
                })
                .collect()
        }
        PerturbationStrategy::Zero => vec![0.0; n],
        PerturbationStrategy::Constant(c) => vec![c; n],
    })
}

/// Copy of `x` with `indices` taken from `replacement`.
pub fn apply_perturbation(x: &[f64], replacement: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    if replacement.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: replacement.len(),
        });
    }
    let mut out = x.to_vec();
    for &i in indices {
        if i >= x.len() {
            return Err(Error::IndexOutOfRange { index: i, len: x.len() });
        }
        out[i] = replacement[i];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Most relevant features first.
    MoRF,
    /// Least relevant features first.
    LeRF,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::MoRF => "morf",
            Direction::LeRF => "lerf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedFeatures {
    pub order: Vec<usize>,
    pub direction: Direction,
}

/// Permutation of time indices: MoRF by descending score, LeRF by ascending
/// score, ties by ascending index in both directions.
pub fn rank_scores(scores: &[f64], direction: Direction) -> RankedFeatures {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    match direction {
        Direction::MoRF => order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a])),
        Direction::LeRF => order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b])),
    }
    RankedFeatures { order, direction }
}

pub fn rank_features(r: &AttributionVector, direction: Direction) -> RankedFeatures {
    rank_scores(r.scores(), direction)
}

/// Cumulative perturbation counts: `step_size` more features per step until
/// `coverage_target` features are perturbed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationSchedule {
    series_length: usize,
    step_size: usize,
    coverage_target: usize,
    cumulative_steps: Vec<usize>,
}

pub const DEFAULT_STEP_PCT: f64 = 0.02;
pub const DEFAULT_COVERAGE_PCT: f64 = 0.5;

impl PerturbationSchedule {
    pub fn new(series_length: usize, step_pct: f64, coverage_pct: f64) -> Result<Self> {
        if series_length < 2 {
            return Err(Error::InvalidArgument(format!(
                "series length {series_length} is below 2"
            )));
        }
        if !(step_pct > 0.0 && step_pct <= coverage_pct && coverage_pct <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "schedule needs 0 < step_pct <= coverage_pct <= 1, got step_pct={step_pct}, coverage_pct={coverage_pct}"
            )));
        }
        let step_size = ceil_fraction(step_pct, series_length).max(1);
        let coverage_target = ceil_fraction(coverage_pct, series_length).clamp(step_size, series_length);
        let m = coverage_target.div_ceil(step_size);
        let cumulative_steps = (1..=m).map(|j| (j * step_size).min(coverage_target)).collect();
        Ok(Self {
            series_length,
            step_size,
            coverage_target,
            cumulative_steps,
        })
    }

    pub fn with_defaults(series_length: usize) -> Result<Self> {
        Self::new(series_length, DEFAULT_STEP_PCT, DEFAULT_COVERAGE_PCT)
    }

    pub fn series_length(&self) -> usize {
        self.series_length
    }

    pub fn step_size(&self) -> usize {
        self.step_size
    }

    pub fn coverage_target(&self) -> usize {
        self.coverage_target
    }

    pub fn cumulative_steps(&self) -> &[usize] {
        &self.cumulative_steps
    }

    /// Number of perturbation steps.
    pub fn m(&self) -> usize {
        self.cumulative_steps.len()
    }

    /// Fraction of the series perturbed after step `j` (0-based).
    pub fn fraction(&self, j: usize) -> f64 {
        self.cumulative_steps[j] as f64 / self.series_length as f64
    }
}

pub fn make_schedule(series_length: usize, step_pct: f64, coverage_pct: f64) -> Result<PerturbationSchedule> {
    PerturbationSchedule::new(series_length, step_pct, coverage_pct)
}

/// Parses a configured strategy list; `constant-grid` expands in place.
pub fn parse_strategies<S: AsRef<str>>(names: &[S]) -> Result<Vec<PerturbationStrategy>> {
    let mut out = Vec::new();
    for name in names {
        let name = name.as_ref();
        if name.trim().eq_ignore_ascii_case("constant-grid") {
            out.extend(PerturbationStrategy::constant_grid());
        } else {
            out.push(name.parse()?);
        }
    }
    let mut seen: Vec<String> = Vec::new();
    for s in &out {
        let key = s.to_string();
        if seen.contains(&key) {
            return Err(Error::InvalidArgument(format!("strategy {key} listed twice")));
        }
        seen.push(key);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        for (n, s, t, m) in [(500, 10, 250, 25), (152, 4, 76, 19), (96, 2, 48, 24)] {
            let sch = make_schedule(n, 0.02, 0.5).unwrap();
            assert_eq!((sch.step_size(), sch.coverage_target(), sch.m()), (s, t, m), "N={n}");
            assert_eq!(*sch.cumulative_steps().last().unwrap(), t);
        }
        let sch = make_schedule(500, 0.02, 0.5).unwrap();
        assert_eq!(sch.cumulative_steps(), (1..=25).map(|j| j * 10).collect::<Vec<_>>());
    }

    #[test]
    fn schedule_last_step_may_be_short() {
        let sch = make_schedule(10, 0.3, 0.5).unwrap();
        assert_eq!(sch.cumulative_steps(), &[3, 5]);
    }

    #[test]
    fn schedule_rejects_bad_parameters() {
        assert!(make_schedule(1, 0.02, 0.5).is_err());
        assert!(make_schedule(10, 0.0, 0.5).is_err());
        assert!(make_schedule(10, 0.6, 0.5).is_err());
        assert!(make_schedule(10, 0.1, 1.5).is_err());
        assert!(make_schedule(10, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn ceil_fraction_ignores_representation_error() {
        assert_eq!(ceil_fraction(0.07, 100), 7);
        assert_eq!(ceil_fraction(0.02, 152), 4);
        assert_eq!(ceil_fraction(0.1, 64), 7);
    }

    #[test]
    fn ranking_examples() {
        let r = [0.1, 0.9, 0.5];
        assert_eq!(rank_scores(&r, Direction::MoRF).order, vec![1, 2, 0]);
        assert_eq!(rank_scores(&r, Direction::LeRF).order, vec![0, 2, 1]);
        assert_eq!(rank_scores(&[0.5, 0.5], Direction::MoRF).order, vec![0, 1]);
        assert_eq!(rank_scores(&[0.5, 0.5], Direction::LeRF).order, vec![0, 1]);
    }

    #[test]
    fn replacement_examples() {
        let opp = replacement_series(&PerturbationStrategy::Opp, &[1.0, -2.0, 0.5], 0).unwrap();
        assert_eq!(opp, vec![-1.0, 2.0, -0.5]);
        let inv = replacement_series(&PerturbationStrategy::Inv, &[2.0, 0.5, -1.0], 0).unwrap();
        assert_eq!(inv, vec![0.0, 1.5, 3.0]);
        // k = 0.5 on N = 4 gives a window of 2
        let sub = replacement_series(&PerturbationStrategy::sub_mean(0.5).unwrap(), &[1.0, 2.0, 3.0, 4.0], 0).unwrap();
        assert_eq!(sub, vec![1.0, 1.5, 2.5, 3.5]);
        let zero = replacement_series(&PerturbationStrategy::Zero, &[3.0, 4.0], 0).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
        let c = replacement_series(&PerturbationStrategy::Constant(0.5), &[3.0, 4.0], 0).unwrap();
        assert_eq!(c, vec![0.5, 0.5]);
    }

    #[test]
    fn gauss_on_constant_series_is_degenerate() {
        let err = replacement_series(&PerturbationStrategy::Gauss, &[1.0, 1.0, 1.0], 3).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn unif_on_constant_series_repeats_the_value() {
        let u = replacement_series(&PerturbationStrategy::Unif, &[2.5; 4], 3).unwrap();
        assert_eq!(u, vec![2.5; 4]);
    }

    #[test]
    fn random_strategies_depend_only_on_seed() {
        let x = [0.3, -1.0, 2.0, 0.7];
        for s in [PerturbationStrategy::Gauss, PerturbationStrategy::Unif] {
            let a = replacement_series(&s, &x, 9).unwrap();
            assert_eq!(a, replacement_series(&s, &x, 9).unwrap());
            assert_ne!(a, replacement_series(&s, &x, 10).unwrap());
        }
        let u = replacement_series(&PerturbationStrategy::Unif, &x, 1).unwrap();
        assert!(u.iter().all(|v| (-1.0..2.0).contains(v)));
    }

    #[test]
    fn apply_examples() {
        let x = [1.0, 2.0, 3.0];
        let r = [0.0, 0.0, 0.0];
        assert_eq!(apply_perturbation(&x, &r, &[]).unwrap(), x.to_vec());
        assert_eq!(apply_perturbation(&x, &r, &[0, 1, 2]).unwrap(), r.to_vec());
        assert_eq!(apply_perturbation(&x, &r, &[1]).unwrap(), vec![1.0, 0.0, 3.0]);
        assert_eq!(
            apply_perturbation(&x, &r, &[3]),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        );
    }

    #[test]
    fn strategy_names_round_trip() {
        let mut all = PerturbationStrategy::named();
        all.extend(PerturbationStrategy::constant_grid());
        all.push(PerturbationStrategy::sub_mean(0.25).unwrap());
        for s in all {
            let parsed: PerturbationStrategy = s.to_string().parse().unwrap();
            assert_eq!(parsed, s);
        }
        assert_eq!(PerturbationStrategy::Constant(-1.5).to_string(), "constant:-1.5");
        assert!("constant".parse::<PerturbationStrategy>().is_err());
        assert!("constant:nan".parse::<PerturbationStrategy>().is_err());
        assert!("submean:0".parse::<PerturbationStrategy>().is_err());
        assert!("blur".parse::<PerturbationStrategy>().is_err());
    }

    #[test]
    fn constant_grid_expands_to_nine() {
        let s = parse_strategies(&["zero", "constant-grid"]).unwrap();
        assert_eq!(s.len(), 10);
        assert!(parse_strategies(&["zero", "constant:0"]).is_ok());
        assert!(parse_strategies(&["zero", "zero"]).is_err());
    }
}
