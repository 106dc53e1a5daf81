//! Run configuration: one JSON document, paths relative to its own location.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsape_core::ingest::DEFAULT_PER_CLASS;
use tsape_core::perturb::{
    parse_strategies, PerturbationSchedule, PerturbationStrategy, DEFAULT_COVERAGE_PCT, DEFAULT_STEP_PCT,
};

use crate::error::RunError;
use crate::formats::DatasetFormat;

/// Environment variable that replaces `sample.seed`.
pub const SEED_ENV: &str = "TSAPE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub sample: SampleSpec,
    pub predictor: PredictorSpec,
    pub attributions: Vec<AttributionSource>,
    pub strategies: Vec<String>,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    pub output: PathBuf,
    /// Restrict evaluation to instances whose predicted class equals the label.
    #[serde(default)]
    pub correct_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    /// Inferred from the file extension when absent.
    #[serde(default)]
    pub format: Option<DatasetFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    #[serde(default = "default_per_class")]
    pub per_class: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            per_class: DEFAULT_PER_CLASS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PredictorSpec {
    /// Nearest-centroid model fitted on `train_path`, or on the full dataset
    /// when absent.
    Centroid {
        #[serde(default)]
        train_path: Option<PathBuf>,
        #[serde(default = "default_temperature")]
        temperature: f64,
    },
    Logistic {
        #[serde(default)]
        train_path: Option<PathBuf>,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
    },
    /// Program and arguments of a server speaking the wire protocol on stdio.
    Command {
        command: Vec<String>,
    },
    Tcp {
        address: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttributionSource {
    Occlusion {
        #[serde(default = "default_window")]
        window: usize,
        #[serde(default)]
        value: f64,
    },
    FdGradient {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default)]
        abs: bool,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default = "default_step_pct")]
    pub step_pct: f64,
    #[serde(default = "default_coverage_pct")]
    pub coverage_pct: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            step_pct: DEFAULT_STEP_PCT,
            coverage_pct: DEFAULT_COVERAGE_PCT,
        }
    }
}

fn default_alphas() -> Vec<f64> {
    vec![0.0, 1.0]
}
fn default_per_class() -> usize {
    DEFAULT_PER_CLASS
}
fn default_temperature() -> f64 {
    1.0
}
fn default_epochs() -> usize {
    200
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_window() -> usize {
    1
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_step_pct() -> f64 {
    DEFAULT_STEP_PCT
}
fn default_coverage_pct() -> f64 {
    DEFAULT_COVERAGE_PCT
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(format!("invalid config: {e}")))
    }

    /// Checks everything that does not need the dataset or the predictor and
    /// returns the parsed strategy list.
    pub fn validate(&self) -> Result<Vec<PerturbationStrategy>, RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if self.attributions.is_empty() {
            return bad("at least one attribution source is required".into());
        }
        if self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0, 1]"));
        }
        if self.sample.per_class == 0 {
            return bad("sample.per_class must be at least 1".into());
        }
        // probe a long series so that only the percentages are judged
        PerturbationSchedule::new(1000, self.schedule.step_pct, self.schedule.coverage_pct)
            .map_err(|e| RunError::Config(format!("schedule: {e}")))?;
        match &self.predictor {
            PredictorSpec::Centroid { temperature, .. } if !(*temperature > 0.0 && temperature.is_finite()) => {
                return bad(format!("centroid temperature {temperature} must be positive"));
            }
            PredictorSpec::Logistic { learning_rate, .. } if !(*learning_rate > 0.0 && learning_rate.is_finite()) => {
                return bad(format!("logistic learning_rate {learning_rate} must be positive"));
            }
            PredictorSpec::Command { command } if command.is_empty() => {
                return bad("predictor command must not be empty".into());
            }
            _ => {}
        }
        for source in &self.attributions {
            match source {
                AttributionSource::Occlusion { window, value } => {
                    if *window == 0 {
                        return bad("occlusion window must be at least 1".into());
                    }
                    if !value.is_finite() {
                        return bad(format!("occlusion value {value} is not finite"));
                    }
                }
                AttributionSource::FdGradient { epsilon, .. } if !(*epsilon > 0.0 && epsilon.is_finite()) => {
                    return bad(format!("fd-gradient epsilon {epsilon} must be positive"));
                }
                _ => {}
            }
        }
        let native: Vec<&str> = self
            .attributions
            .iter()
            .filter_map(|s| match s {
                AttributionSource::Occlusion { .. } => Some("occlusion"),
                AttributionSource::FdGradient { abs: false, .. } => Some("fd-gradient"),
                AttributionSource::FdGradient { abs: true, .. } => Some("fd-gradient-abs"),
                AttributionSource::File { .. } => None,
            })
            .collect();
        for (i, name) in native.iter().enumerate() {
            if native[..i].contains(name) {
                return bad(format!("attribution source {name} listed twice"));
            }
        }
        parse_strategies(&self.strategies).map_err(|e| RunError::Config(e.to_string()))
    }

    /// SHA-256 of the config serialized as JSON with sorted keys.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.dataset.path);
        join(&mut self.output);
        match &mut self.predictor {
            PredictorSpec::Centroid {
                train_path: Some(p), ..
            }
            | PredictorSpec::Logistic {
                train_path: Some(p), ..
            } => join(p),
            _ => {}
        }
        for source in &mut self.attributions {
            if let AttributionSource::File { path } = source {
                join(path);
            }
        }
    }
}

/// A config read from disk: `config` has absolute paths, `hash` digests the
/// document as written after the seed override.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
    pub source: PathBuf,
}

impl LoadedConfig {
    pub fn seed(&self) -> u64 {
        self.config.sample.seed
    }

    pub fn dataset_format(&self) -> DatasetFormat {
        self.config
            .dataset
            .format
            .unwrap_or_else(|| DatasetFormat::from_extension(&self.config.dataset.path))
    }
}

/// Reads, applies `seed_override` (normally from [`SEED_ENV`]), hashes and
/// resolves paths against the config file's directory.
pub fn load_config(path: &Path, seed_override: Option<&str>) -> Result<LoadedConfig, RunError> {
    let text =
        fs::read_to_string(path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(raw) = seed_override {
        config.sample.seed = raw
            .trim()
            .parse()
            .map_err(|_| RunError::Config(format!("{SEED_ENV}={raw:?} is not an unsigned 64-bit integer")))?;
    }
    let hash = config.hash();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.resolve(&base);
    Ok(LoadedConfig {
        config,
        hash,
        source: path.to_path_buf(),
    })
}
