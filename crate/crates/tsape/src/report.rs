//! Result files. Every csv starts with a `# config_hash=<hex>` line; numbers
//! are fixed to six decimals so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tsape_core::metrics::{AggregateCell, DegradationRecord, PerturbationCurve};

use crate::error::RunError;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_JSON_FILE: &str = "summary.json";
pub const DISTRIBUTIONS_FILE: &str = "distributions.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const QUARANTINE_DIR: &str = "quarantine";

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "dataset",
    "predictor",
    "method",
    "strategy",
    "n",
    "mean_ds",
    "class_id",
    "class_mean_ds",
    "delta",
    "alpha",
    "ds_c",
];
pub const DISTRIBUTION_COLUMNS: [&str; 5] = ["series_id", "predicted_class", "method", "strategy", "ds"];
pub const CURVE_COLUMNS: [&str; 8] = [
    "series_id",
    "predicted_class",
    "method",
    "strategy",
    "direction",
    "step_index",
    "fraction_perturbed",
    "prob",
];

/// Six-decimal rendering; negative zero prints as zero.
pub fn fixed(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

fn start<W: Write>(mut w: W, config_hash: &str, columns: &[&str]) -> io::Result<csv::Writer<W>> {
    writeln!(w, "# config_hash={config_hash}")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(columns)?;
    Ok(csv)
}

/// Run-level labels repeated on every summary row.
#[derive(Debug, Clone)]
pub struct ReportContext<'a> {
    pub config_hash: &'a str,
    pub dataset: &'a str,
    pub predictor: &'a str,
}

/// One summary row, shared by the csv and JSON renderings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub predictor: String,
    pub method: String,
    pub strategy: String,
    pub n: usize,
    pub mean_ds: f64,
    pub class_id: usize,
    pub class_mean_ds: f64,
    pub delta: Option<f64>,
    pub alpha: f64,
    pub ds_c: Option<f64>,
}

/// One row per (cell, present class, alpha), values rounded as emitted.
pub fn summary_rows(ctx: &ReportContext<'_>, cells: &[AggregateCell]) -> Vec<SummaryRow> {
    let round = |v: f64| fixed(v).parse::<f64>().expect("fixed output parses");
    let mut rows = Vec::new();
    for cell in cells {
        for (&class_id, &class_mean) in &cell.per_class_mean_ds {
            for &(alpha, ds_c) in &cell.ds_c_by_alpha {
                rows.push(SummaryRow {
                    dataset: ctx.dataset.to_string(),
                    predictor: ctx.predictor.to_string(),
                    method: cell.method.clone(),
                    strategy: cell.strategy.to_string(),
                    n: cell.n,
                    mean_ds: round(cell.mean_ds),
                    class_id,
                    class_mean_ds: round(class_mean),
                    delta: cell.delta.map(round),
                    alpha: round(alpha),
                    ds_c: ds_c.map(round),
                });
            }
        }
    }
    rows
}

pub fn write_summary<W: Write>(w: W, ctx: &ReportContext<'_>, cells: &[AggregateCell]) -> io::Result<()> {
    let mut csv = start(w, ctx.config_hash, &SUMMARY_COLUMNS)?;
    for row in summary_rows(ctx, cells) {
        csv.write_record([
            row.dataset,
            row.predictor,
            row.method,
            row.strategy,
            row.n.to_string(),
            fixed(row.mean_ds),
            row.class_id.to_string(),
            fixed(row.class_mean_ds),
            opt(row.delta),
            fixed(row.alpha),
            opt(row.ds_c),
        ])?;
    }
    csv.flush()
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    config_hash: &'a str,
    rows: Vec<SummaryRow>,
}

pub fn write_summary_json<W: Write>(mut w: W, ctx: &ReportContext<'_>, cells: &[AggregateCell]) -> io::Result<()> {
    let doc = SummaryJson {
        config_hash: ctx.config_hash,
        rows: summary_rows(ctx, cells),
    };
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()
}

pub fn write_distributions<W: Write>(w: W, config_hash: &str, records: &[DegradationRecord]) -> io::Result<()> {
    let mut csv = start(w, config_hash, &DISTRIBUTION_COLUMNS)?;
    for r in records {
        csv.write_record([
            r.series_id.clone(),
            r.predicted_class.to_string(),
            r.method.clone(),
            r.strategy.to_string(),
            fixed(r.ds),
        ])?;
    }
    csv.flush()
}

/// Each curve contributes its unperturbed point as step 0, then its `m`
/// steps.
pub fn write_curves<W: Write>(w: W, config_hash: &str, curves: &[PerturbationCurve]) -> io::Result<()> {
    let mut csv = start(w, config_hash, &CURVE_COLUMNS)?;
    for c in curves {
        let points = std::iter::once((0.0, c.initial_prob)).chain((0..c.m()).map(|j| (c.fraction(j), c.probs[j])));
        for (step, (fraction, prob)) in points.enumerate() {
            csv.write_record([
                c.series_id.clone(),
                c.target_class.to_string(),
                c.method.clone(),
                c.strategy.to_string(),
                c.direction.to_string(),
                step.to_string(),
                fixed(fraction),
                fixed(prob),
            ])?;
        }
    }
    csv.flush()
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleInfo {
    pub series_length: usize,
    pub step_size: usize,
    pub coverage_target: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellInfo {
    pub method: String,
    pub strategy: String,
    pub n: usize,
    pub mean_ds: f64,
    pub mean_of_class_means: f64,
    pub balanced: bool,
    pub n_per_class: BTreeMap<usize, usize>,
    pub delta: Option<f64>,
}

impl From<&AggregateCell> for CellInfo {
    fn from(c: &AggregateCell) -> Self {
        Self {
            method: c.method.clone(),
            strategy: c.strategy.to_string(),
            n: c.n,
            mean_ds: c.mean_ds,
            mean_of_class_means: c.mean_of_class_means,
            balanced: c.balanced,
            n_per_class: c.n_per_class.clone(),
            delta: c.delta,
        }
    }
}

/// Provenance written next to the result files.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub dataset: String,
    pub label_names: Vec<String>,
    pub predictor: String,
    pub strategies: Vec<String>,
    pub methods: Vec<String>,
    pub alphas: Vec<f64>,
    pub schedule: ScheduleInfo,
    pub rng: String,
    pub tool: String,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub instances_sampled: usize,
    pub instances_evaluated: usize,
    pub excluded_misclassified: usize,
    pub znorm_flagged: usize,
    pub warnings: Vec<String>,
    pub cells: Vec<CellInfo>,
    pub files: Vec<String>,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(RunError::output(path))
}

fn emit<F>(path: PathBuf, f: F) -> Result<PathBuf, RunError>
where
    F: FnOnce(BufWriter<File>) -> io::Result<()>,
{
    let w = create(&path)?;
    f(w).map_err(RunError::output(&path))?;
    Ok(path)
}

/// Writes summary, distributions, curves (and the JSON summary when asked)
/// into `dir`, then the manifest listing them.
pub fn emit_all(
    dir: &Path,
    ctx: &ReportContext<'_>,
    cells: &[AggregateCell],
    records: &[DegradationRecord],
    curves: &[PerturbationCurve],
    json: bool,
    mut manifest: RunManifest,
) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(RunError::output(dir))?;
    let mut files = vec![
        emit(dir.join(SUMMARY_FILE), |w| write_summary(w, ctx, cells))?,
        emit(dir.join(DISTRIBUTIONS_FILE), |w| {
            write_distributions(w, ctx.config_hash, records)
        })?,
        emit(dir.join(CURVES_FILE), |w| write_curves(w, ctx.config_hash, curves))?,
    ];
    if json {
        files.push(emit(dir.join(SUMMARY_JSON_FILE), |w| {
            write_summary_json(w, ctx, cells)
        })?);
    }
    manifest.files = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    files.push(emit(dir.join(MANIFEST_FILE), |mut w| {
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)?;
        w.flush()
    })?);
    Ok(files)
}

/// Writes the output of completed instances and the error text into
/// `dir/quarantine`, away from regular results.
pub fn quarantine(
    dir: &Path,
    config_hash: &str,
    error: &RunError,
    records: &[DegradationRecord],
    curves: &[PerturbationCurve],
) -> Result<PathBuf, RunError> {
    let q = dir.join(QUARANTINE_DIR);
    fs::create_dir_all(&q).map_err(RunError::output(&q))?;
    emit(q.join(DISTRIBUTIONS_FILE), |w| {
        write_distributions(w, config_hash, records)
    })?;
    emit(q.join(CURVES_FILE), |w| write_curves(w, config_hash, curves))?;
    emit(q.join("error.txt"), |mut w| {
        writeln!(w, "# config_hash={config_hash}")?;
        writeln!(w, "{error}")?;
        w.flush()
    })?;
    Ok(q)
}
