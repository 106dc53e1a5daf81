//! Orchestration: sample, predict, attribute, perturb, score, aggregate.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use tsape_core::attribute::{fd_gradient_attribution, occlusion_attribution, FdParams, OcclusionParams};
use tsape_core::ingest::{stratified_sample, znorm_report, SamplingSpec};
use tsape_core::metrics::{
    aggregate, degradation_score, perturbation_curve_with_replacement, AggregateCell, DegradationRecord,
    PerturbationCurve,
};
use tsape_core::perturb::{replacement_series, Direction, PerturbationSchedule, PerturbationStrategy};
use tsape_core::predict::{fit_centroid, fit_logistic, predict_proba, LogisticFit, Predictor};
use tsape_core::rng::instance_seed;
use tsape_core::{validate_dataset, AttributionVector, Dataset, PredictError, TimeSeries};

use crate::attrfile::load_attributions;
use crate::config::{AttributionSource, LoadedConfig, PredictorSpec};
use crate::error::RunError;
use crate::formats::load_dataset;
use crate::protocol::ExternalPredictor;

pub type SharedPredictor = Arc<dyn Predictor + Send + Sync>;

/// Where worker threads get their predictor handles from. Built-in models
/// are shared; external predictors get one connection per worker.
#[derive(Clone)]
pub enum PredictorSource {
    Shared(SharedPredictor),
    Command(Vec<String>),
    Tcp(String),
}

impl PredictorSource {
    pub fn open(&self) -> Result<SharedPredictor, PredictError> {
        Ok(match self {
            PredictorSource::Shared(p) => Arc::clone(p),
            PredictorSource::Command(cmd) => Arc::new(ExternalPredictor::spawn(cmd)?),
            PredictorSource::Tcp(addr) => Arc::new(ExternalPredictor::connect(addr)?),
        })
    }
}

/// One attribution method applied to every instance.
#[derive(Debug, Clone)]
pub enum Method {
    Occlusion(OcclusionParams),
    FdGradient(FdParams),
    /// Vectors read from a file, keyed by series id.
    Precomputed {
        name: String,
        vectors: HashMap<String, AttributionVector>,
    },
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Method::Occlusion(_) => tsape_core::attribute::OCCLUSION_METHOD,
            Method::FdGradient(p) if p.abs => tsape_core::attribute::FD_GRADIENT_ABS_METHOD,
            Method::FdGradient(_) => tsape_core::attribute::FD_GRADIENT_METHOD,
            Method::Precomputed { name, .. } => name,
        }
    }

    fn attribute<P: Predictor + ?Sized>(&self, p: &P, x: &TimeSeries) -> Result<AttributionVector, RunError> {
        let class = x
            .predicted_class
            .ok_or_else(|| RunError::Data(format!("instance {} has no predicted class", x.id)))?;
        let at = |e| RunError::at_instance(&x.id, e);
        match self {
            Method::Occlusion(params) => occlusion_attribution(p, x, class, params).map_err(at),
            Method::FdGradient(params) => fd_gradient_attribution(p, x, class, params).map_err(at),
            Method::Precomputed { name, vectors } => {
                let r = vectors
                    .get(&x.id)
                    .ok_or_else(|| RunError::Data(format!("no {name} attribution for instance {}", x.id)))?;
                if r.target_class() != class {
                    return Err(RunError::Data(format!(
                        "{name} attribution for instance {} targets class {}, predicted class is {class}",
                        x.id,
                        r.target_class()
                    )));
                }
                Ok(r.clone())
            }
        }
    }
}

/// Everything needed to evaluate a prepared sample.
#[derive(Clone)]
pub struct Plan {
    pub dataset_name: String,
    /// Instances to evaluate, each with its predicted class set.
    pub instances: Vec<TimeSeries>,
    pub predictor: PredictorSource,
    pub predictor_description: String,
    pub methods: Vec<Method>,
    pub strategies: Vec<PerturbationStrategy>,
    pub schedule: PerturbationSchedule,
    pub alphas: Vec<f64>,
    pub seed: u64,
}

/// Facts gathered while preparing a plan, for the manifest.
#[derive(Debug, Clone, Default)]
pub struct PrepInfo {
    pub series_length: usize,
    pub n_classes: usize,
    pub label_names: Vec<String>,
    pub sampled: usize,
    pub excluded_misclassified: usize,
    pub warnings: Vec<String>,
    pub znorm_flagged: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<DegradationRecord>,
    pub curves: Vec<PerturbationCurve>,
    pub cells: Vec<AggregateCell>,
}

/// Output of the instances that completed before a failure.
#[derive(Debug)]
pub struct Failure {
    pub error: RunError,
    pub records: Vec<DegradationRecord>,
    pub curves: Vec<PerturbationCurve>,
}

fn check_predictor(p: &dyn Predictor, d: &Dataset) -> Result<(), RunError> {
    if p.n_classes() != d.n_classes {
        return Err(RunError::Predictor(format!(
            "predictor has {} classes, dataset has {}",
            p.n_classes(),
            d.n_classes
        )));
    }
    if let Some(n) = p.series_length() {
        if n != d.series_length {
            return Err(RunError::Predictor(format!(
                "predictor expects series of length {n}, dataset has length {}",
                d.series_length
            )));
        }
    }
    Ok(())
}

fn training_data(path: Option<&std::path::Path>, full: &Dataset) -> Result<Dataset, RunError> {
    let Some(path) = path else {
        return Ok(full.clone());
    };
    let d = load_dataset(path, crate::formats::DatasetFormat::from_extension(path))
        .map_err(|e| RunError::Data(format!("{}: {e}", path.display())))?;
    if d.label_names != full.label_names {
        return Err(RunError::Data(format!(
            "training labels {:?} differ from dataset labels {:?}",
            d.label_names, full.label_names
        )));
    }
    Ok(d)
}

fn build_predictor(loaded: &LoadedConfig, full: &Dataset) -> Result<PredictorSource, RunError> {
    let fit_err = |e: tsape_core::Error| RunError::Data(format!("fitting predictor: {e}"));
    Ok(match &loaded.config.predictor {
        PredictorSpec::Centroid {
            train_path,
            temperature,
        } => {
            let train = training_data(train_path.as_deref(), full)?;
            PredictorSource::Shared(Arc::new(fit_centroid(&train, *temperature).map_err(fit_err)?))
        }
        PredictorSpec::Logistic {
            train_path,
            epochs,
            learning_rate,
        } => {
            let train = training_data(train_path.as_deref(), full)?;
            let fit = LogisticFit {
                epochs: *epochs,
                learning_rate: *learning_rate,
                seed: loaded.seed(),
            };
            PredictorSource::Shared(Arc::new(fit_logistic(&train, &fit).map_err(fit_err)?))
        }
        PredictorSpec::Command { command } => PredictorSource::Command(command.clone()),
        PredictorSpec::Tcp { address } => PredictorSource::Tcp(address.clone()),
    })
}

/// Sets `predicted_class` on every instance with one batched call.
pub fn predict_classes(p: &dyn Predictor, instances: &mut [TimeSeries]) -> Result<(), RunError> {
    let rows: Vec<&[f64]> = instances.iter().map(|s| s.values.as_slice()).collect();
    let probs = predict_proba(p, &rows)?;
    for (s, q) in instances.iter_mut().zip(probs) {
        s.predicted_class = Some(q.predicted_class());
    }
    Ok(())
}

/// Loads data and predictor per the config and assembles a [`Plan`].
pub fn prepare(loaded: &LoadedConfig) -> Result<(Plan, PrepInfo), RunError> {
    let cfg = &loaded.config;
    let strategies = cfg.validate()?;
    let full = load_dataset(&cfg.dataset.path, loaded.dataset_format())
        .map_err(|e| RunError::Data(format!("{}: {e}", cfg.dataset.path.display())))?;
    let violations = validate_dataset(&full);
    if !violations.is_empty() {
        let shown: Vec<String> = violations.iter().take(5).map(ToString::to_string).collect();
        return Err(RunError::Data(format!(
            "{} invalid ({} violation(s)): {}",
            cfg.dataset.path.display(),
            violations.len(),
            shown.join("; ")
        )));
    }
    let schedule = PerturbationSchedule::new(full.series_length, cfg.schedule.step_pct, cfg.schedule.coverage_pct)
        .map_err(|e| RunError::Config(format!("schedule: {e}")))?;
    let source = build_predictor(loaded, &full)?;
    let handle = source.open()?;
    check_predictor(handle.as_ref(), &full)?;

    let spec = SamplingSpec::new(cfg.sample.per_class, cfg.sample.seed).map_err(|e| RunError::Config(e.to_string()))?;
    let sample = stratified_sample(&full, &spec).map_err(|e| RunError::Data(e.to_string()))?;
    let mut info = PrepInfo {
        series_length: full.series_length,
        n_classes: full.n_classes,
        label_names: full.label_names.clone(),
        sampled: sample.dataset.len(),
        warnings: sample.warnings,
        znorm_flagged: znorm_report(&sample.dataset).iter().filter(|e| e.flagged).count(),
        ..PrepInfo::default()
    };
    let mut instances = sample.dataset.instances;
    predict_classes(handle.as_ref(), &mut instances)?;
    if cfg.correct_only {
        let before = instances.len();
        instances.retain(|s| s.label == s.predicted_class);
        info.excluded_misclassified = before - instances.len();
    }
    if instances.is_empty() {
        return Err(RunError::Data("no instances left to evaluate".into()));
    }

    let mut methods = Vec::new();
    for src in &cfg.attributions {
        match src {
            AttributionSource::Occlusion { window, value } => methods.push(Method::Occlusion(OcclusionParams {
                window: *window,
                value: *value,
            })),
            AttributionSource::FdGradient { epsilon, abs } => methods.push(Method::FdGradient(FdParams {
                epsilon: *epsilon,
                abs: *abs,
            })),
            AttributionSource::File { path } => {
                let vectors =
                    load_attributions(path, &full).map_err(|e| RunError::Data(format!("{}: {e}", path.display())))?;
                let mut by_method: Vec<(String, HashMap<String, AttributionVector>)> = Vec::new();
                for v in vectors {
                    let name = v.method().to_string();
                    match by_method.iter_mut().find(|(n, _)| *n == name) {
                        Some((_, map)) => {
                            map.insert(v.series_id().to_string(), v);
                        }
                        None => by_method.push((name, HashMap::from([(v.series_id().to_string(), v)]))),
                    }
                }
                for (name, vectors) in by_method {
                    methods.push(Method::Precomputed { name, vectors });
                }
            }
        }
    }
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].iter().any(|o| o.name() == m.name()) {
            return Err(RunError::Config(format!(
                "attribution method {} provided twice",
                m.name()
            )));
        }
    }

    let plan = Plan {
        dataset_name: full.name.clone(),
        instances,
        predictor_description: handle.describe(),
        predictor: source,
        methods,
        strategies,
        schedule,
        alphas: cfg.alphas.clone(),
        seed: cfg.sample.seed,
    };
    Ok((plan, info))
}

type InstanceOutput = (Vec<DegradationRecord>, Vec<PerturbationCurve>);

/// Records in method-major, then strategy order; curves MoRF then LeRF.
fn evaluate_instance(plan: &Plan, p: &dyn Predictor, x: &TimeSeries) -> Result<InstanceOutput, RunError> {
    let at = |e| RunError::at_instance(&x.id, e);
    let seed = instance_seed(plan.seed, &x.id);
    let replacements = plan
        .strategies
        .iter()
        .map(|s| replacement_series(s, &x.values, seed).map_err(at))
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::new();
    let mut curves = Vec::new();
    for method in &plan.methods {
        let r = method.attribute(p, x)?;
        for (strategy, replacement) in plan.strategies.iter().zip(&replacements) {
            let curve =
                |d| perturbation_curve_with_replacement(p, x, &r, strategy, replacement, &plan.schedule, d).map_err(at);
            let morf = curve(Direction::MoRF)?;
            let lerf = curve(Direction::LeRF)?;
            records.push(degradation_score(&lerf, &morf).map_err(at)?);
            curves.push(morf);
            curves.push(lerf);
        }
    }
    Ok((records, curves))
}

/// Evaluates every instance on up to `workers` threads. Results are merged
/// in instance order, so output does not depend on scheduling. On failure the
/// error of the earliest failing instance is reported together with the
/// output of all instances that completed.
pub fn execute(plan: &Plan, workers: usize) -> Result<RunResult, Failure> {
    let n = plan.instances.len();
    let workers = workers.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<InstanceOutput, RunError>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let open_error: Mutex<Option<RunError>> = Mutex::new(None);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let predictor = match plan.predictor.open() {
                    Ok(p) => p,
                    Err(e) => {
                        stop.store(true, Ordering::SeqCst);
                        open_error.lock().unwrap().get_or_insert(RunError::from(e));
                        return;
                    }
                };
                while !stop.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let out = evaluate_instance(plan, predictor.as_ref(), &plan.instances[i]);
                    if out.is_err() {
                        stop.store(true, Ordering::SeqCst);
                    }
                    *slots[i].lock().unwrap() = Some(out);
                }
            });
        }
    });
    let mut records = Vec::new();
    let mut curves = Vec::new();
    let mut error = open_error.into_inner().unwrap();
    for slot in slots {
        match slot.into_inner().unwrap() {
            Some(Ok((r, c))) => {
                records.extend(r);
                curves.extend(c);
            }
            Some(Err(e)) => {
                error.get_or_insert(e);
            }
            None => {}
        }
    }
    if let Some(error) = error {
        return Err(Failure { error, records, curves });
    }
    match aggregate(&records, &plan.alphas) {
        Ok(cells) => Ok(RunResult { records, curves, cells }),
        Err(e) => Err(Failure {
            error: RunError::Data(format!("aggregation: {e}")),
            records,
            curves,
        }),
    }
}
