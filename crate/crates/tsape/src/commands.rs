//! Subcommand bodies shared by the binary and the tests.

use std::path::{Path, PathBuf};

use tsape_core::perturb::STRATEGY_CATALOG;
use tsape_core::rng::RNG_VERSION;

use crate::config::{load_config, LoadedConfig};
use crate::demo::{class_effect_plan, DemoParams};
use crate::error::RunError;
use crate::report::{emit_all, quarantine, unix_now, CellInfo, ReportContext, RunManifest, ScheduleInfo};
use crate::runner::{execute, prepare, Plan, PrepInfo, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    pub json: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            json: false,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub result: RunResult,
    pub files: Vec<PathBuf>,
    pub info: PrepInfo,
}

fn manifest(config_hash: &str, plan: &Plan, info: &PrepInfo, result: &RunResult, started: u64) -> RunManifest {
    let s = &plan.schedule;
    RunManifest {
        config_hash: config_hash.to_string(),
        seed: plan.seed,
        dataset: plan.dataset_name.clone(),
        label_names: info.label_names.clone(),
        predictor: plan.predictor_description.clone(),
        strategies: plan.strategies.iter().map(ToString::to_string).collect(),
        methods: plan.methods.iter().map(|m| m.name().to_string()).collect(),
        alphas: plan.alphas.clone(),
        schedule: ScheduleInfo {
            series_length: s.series_length(),
            step_size: s.step_size(),
            coverage_target: s.coverage_target(),
            steps: s.m(),
        },
        rng: format!("splitmix64 v{RNG_VERSION}"),
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        instances_sampled: info.sampled,
        instances_evaluated: plan.instances.len(),
        excluded_misclassified: info.excluded_misclassified,
        znorm_flagged: info.znorm_flagged,
        warnings: info.warnings.clone(),
        cells: result.cells.iter().map(CellInfo::from).collect(),
        files: Vec::new(),
    }
}

/// Executes `plan` and writes reports to `out`, or the partial output to
/// `out/quarantine` on failure.
pub fn run_plan(
    plan: &Plan,
    info: PrepInfo,
    config_hash: &str,
    out: &Path,
    opts: RunOptions,
) -> Result<Outcome, RunError> {
    let started = unix_now();
    let result = match execute(plan, opts.workers) {
        Ok(r) => r,
        Err(failure) => {
            quarantine(out, config_hash, &failure.error, &failure.records, &failure.curves)?;
            return Err(failure.error);
        }
    };
    let ctx = ReportContext {
        config_hash,
        dataset: &plan.dataset_name,
        predictor: &plan.predictor_description,
    };
    let m = manifest(config_hash, plan, &info, &result, started);
    let files = emit_all(out, &ctx, &result.cells, &result.records, &result.curves, opts.json, m)?;
    Ok(Outcome { result, files, info })
}

pub fn evaluate(config: &Path, seed_override: Option<&str>, opts: RunOptions) -> Result<Outcome, RunError> {
    let loaded = load_config(config, seed_override)?;
    let (plan, info) = prepare(&loaded)?;
    run_plan(&plan, info, &loaded.hash, &loaded.config.output, opts)
}

/// Dry run: everything `evaluate` checks before the first curve.
pub fn validate(config: &Path, seed_override: Option<&str>) -> Result<(LoadedConfig, Plan, PrepInfo), RunError> {
    let loaded = load_config(config, seed_override)?;
    let (plan, info) = prepare(&loaded)?;
    Ok((loaded, plan, info))
}

pub fn demo_class_effect(out: &Path, seed: u64, opts: RunOptions) -> Result<Outcome, RunError> {
    let params = DemoParams::new(seed);
    let plan = class_effect_plan(&params)?;
    let info = PrepInfo {
        series_length: params.series_length,
        n_classes: 2,
        label_names: vec!["0".into(), "1".into()],
        sampled: plan.instances.len(),
        ..PrepInfo::default()
    };
    run_plan(&plan, info, &params.hash(), out, opts)
}

/// Human-readable strategy table.
pub fn strategy_listing() -> String {
    let mut out = String::new();
    for s in &STRATEGY_CATALOG {
        out.push_str(&format!("{:<10} {}\n", s.name, s.description));
        out.push_str(&format!("{:<10} rule: {}\n", "", s.rule));
        out.push_str(&format!("{:<10} parameters: {}\n", "", s.parameters));
    }
    out
}
