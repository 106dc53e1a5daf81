//! Label remapping, stratified sampling and normalization checks.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::DetRng;
use crate::types::{ClassId, Dataset};

/// Raw label vocabulary mapped onto dense ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    /// Raw token for each dense id, in id order.
    pub names: Vec<String>,
    /// Dense id of each input label, in input order.
    pub dense: Vec<ClassId>,
}

impl LabelMap {
    pub fn n_classes(&self) -> usize {
        self.names.len()
    }

    pub fn id_of(&self, raw: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == raw)
    }
}

/// Assigns `0..C` to the distinct raw labels, preserving their order: numeric
/// order when every token parses as a finite number, byte order otherwise.
pub fn remap_labels<S: AsRef<str>>(raw_labels: &[S]) -> Result<LabelMap> {
    let mut distinct: Vec<&str> = raw_labels.iter().map(|s| s.as_ref()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::TooFewClasses { found: distinct.len() });
    }
    let numeric: Option<Vec<f64>> = distinct
        .iter()
        .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    if let Some(values) = numeric {
        let mut keyed: Vec<(f64, &str)> = values.into_iter().zip(distinct).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        distinct = keyed.into_iter().map(|(_, t)| t).collect();
    }
    let index: BTreeMap<&str, ClassId> = distinct.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    Ok(LabelMap {
        names: distinct.iter().map(|t| t.to_string()).collect(),
        dense: raw_labels.iter().map(|s| index[s.as_ref()]).collect(),
    })
}

/// Default instances drawn per class.
pub const DEFAULT_PER_CLASS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingSpec {
    pub per_class: usize,
    pub seed: u64,
}

impl SamplingSpec {
    pub fn new(per_class: usize, seed: u64) -> Result<Self> {
        if per_class == 0 {
            return Err(Error::InvalidArgument("per_class must be at least 1".into()));
        }
        Ok(Self { per_class, seed })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Draws `min(per_class, available)` instances of each class without
/// replacement.
///
/// One [`DetRng`] seeded with `spec.seed` is shared across classes, visited in
/// id order. For each class the pool is its instances in dataset order and
/// draw `t` swaps position `t` with `t + below(len - t)` (partial
/// Fisher-Yates). Output is ordered by class, then draw order. Unlabeled
/// instances are never drawn.
pub fn stratified_sample(d: &Dataset, spec: &SamplingSpec) -> Result<Sample> {
    if spec.per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be at least 1".into()));
    }
    let mut rng = DetRng::new(spec.seed);
    let mut warnings = Vec::new();
    let unlabeled = d.instances.iter().filter(|s| s.label.is_none()).count();
    if unlabeled > 0 {
        warnings.push(format!("{unlabeled} unlabeled instance(s) excluded from sampling"));
    }
    let mut instances = Vec::new();
    for class in 0..d.n_classes {
        let mut pool: Vec<usize> = (0..d.len()).filter(|&i| d.instances[i].label == Some(class)).collect();
        let take = spec.per_class.min(pool.len());
        if take < spec.per_class {
            warnings.push(format!(
                "class {class} has {} instance(s), fewer than the requested {}; taking all",
                pool.len(),
                spec.per_class
            ));
        }
        for t in 0..take {
            let j = t + rng.below(pool.len() - t);
            pool.swap(t, j);
        }
        instances.extend(pool[..take].iter().map(|&i| d.instances[i].clone()));
    }
    let mut dataset = Dataset::from_instances(d.name.clone(), d.n_classes, instances, d.label_names.clone());
    dataset.series_length = d.series_length;
    Ok(Sample { dataset, warnings })
}

/// Flag threshold on `|mean|` and `|std - 1|`.
pub const ZNORM_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ZNormEntry {
    pub id: String,
    pub mean: f64,
    /// Population standard deviation (divides by N).
    pub std: f64,
    pub flagged: bool,
}

/// Per-instance mean and population standard deviation; never modifies data.
pub fn znorm_report(d: &Dataset) -> Vec<ZNormEntry> {
    d.instances
        .iter()
        .map(|s| {
            let (mean, std) = mean_std(&s.values);
            let flagged = !(libm::fabs(mean) <= ZNORM_TOLERANCE && libm::fabs(std - 1.0) <= ZNORM_TOLERANCE);
            ZNormEntry {
                id: s.id.clone(),
                mean,
                std,
                flagged,
            }
        })
        .collect()
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}
