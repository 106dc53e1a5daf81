use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tsape::commands::{self, RunOptions};
use tsape::config::SEED_ENV;
use tsape::RunError;

#[derive(Parser)]
#[command(
    name = "tsape",
    version,
    about = "Perturbation-based evaluation of time-series attributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured evaluation and write result files.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Also write summary.json.
        #[arg(long)]
        json: bool,
        /// Worker threads (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List perturbation strategies.
    Strategies,
    /// Run the synthetic two-class demonstration.
    DemoClassEffect {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check config, dataset and predictor without evaluating.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn options(workers: Option<usize>, json: bool) -> Result<RunOptions, RunError> {
    let mut opts = RunOptions {
        json,
        ..RunOptions::default()
    };
    if let Some(w) = workers {
        if w == 0 {
            return Err(RunError::Config("--workers must be at least 1".into()));
        }
        opts.workers = w;
    }
    Ok(opts)
}

fn report_outcome(outcome: &commands::Outcome) {
    for w in &outcome.info.warnings {
        eprintln!("warning: {w}");
    }
    if outcome.info.znorm_flagged > 0 {
        eprintln!(
            "warning: {} sampled instance(s) are not z-normalized (|mean| or |std - 1| above 0.1)",
            outcome.info.znorm_flagged
        );
    }
    println!(
        "{} degradation records, {} curves",
        outcome.result.records.len(),
        outcome.result.curves.len()
    );
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let seed_env = std::env::var(SEED_ENV).ok();
    match cli.command {
        Cmd::Evaluate { config, json, workers } => {
            let outcome = commands::evaluate(&config, seed_env.as_deref(), options(workers, json)?)?;
            report_outcome(&outcome);
        }
        Cmd::Strategies => print!("{}", commands::strategy_listing()),
        Cmd::DemoClassEffect { out, seed, workers } => {
            let outcome = commands::demo_class_effect(&out, seed, options(workers, false)?)?;
            report_outcome(&outcome);
            for cell in &outcome.result.cells {
                let means: Vec<String> = cell
                    .per_class_mean_ds
                    .iter()
                    .map(|(c, m)| format!("class {c}: {m:.6}"))
                    .collect();
                println!(
                    "{} {}: mean DS {:.6}, {}",
                    cell.method,
                    cell.strategy,
                    cell.mean_ds,
                    means.join(", ")
                );
            }
        }
        Cmd::Validate { config } => {
            let (loaded, plan, info) = commands::validate(&config, seed_env.as_deref())?;
            for w in &info.warnings {
                eprintln!("warning: {w}");
            }
            println!("config hash {}", loaded.hash);
            println!(
                "dataset {}: {} classes, length {}, {} sampled, {} to evaluate",
                plan.dataset_name,
                info.n_classes,
                info.series_length,
                info.sampled,
                plan.instances.len()
            );
            println!("predictor {}", plan.predictor_description);
            let methods: Vec<&str> = plan.methods.iter().map(|m| m.name()).collect();
            let strategies: Vec<String> = plan.strategies.iter().map(ToString::to_string).collect();
            println!("methods {}", methods.join(", "));
            println!("strategies {}", strategies.join(", "));
            println!(
                "{} steps of {} points up to {}",
                plan.schedule.m(),
                plan.schedule.step_size(),
                plan.schedule.coverage_target()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
