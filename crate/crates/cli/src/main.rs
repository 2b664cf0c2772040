//! Command-line front end: run one experiment, validate a config, or run a
//! set of baseline strategies side by side.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use leofl::config::{ExperimentConfig, Strategy};
use leofl::harness::{prepare, run_prepared, RunOutput};
use leofl::metrics::emit_metrics;
use leofl::wire;

#[derive(Parser)]
#[command(
    name = "leofl",
    version,
    about = "Federated learning over LEO satellite constellations, simulated at desk scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run one experiment and write metrics plus the final model.
    Run {
        /// TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config, listing every problem found.
    Validate {
        /// TOML experiment config.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run several strategies from one shared setup and print a summary table.
    Compare {
        /// TOML experiment config; its strategy field is ignored.
        #[arg(long)]
        config: PathBuf,
        /// Directory receiving one metrics subdirectory per strategy.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated strategy names.
        #[arg(long, value_delimiter = ',')]
        baselines: Vec<String>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Commands::Run {
            config,
            seed,
            strategy,
            out,
        } => run(&config, seed, strategy.as_deref(), out),
        Commands::Validate { config } => validate(&config),
        Commands::Compare {
            config,
            out,
            baselines,
        } => compare(&config, &out, &baselines),
    }
}

fn run(path: &Path, seed: Option<u64>, strategy: Option<&str>, out: Option<PathBuf>) -> Result<()> {
    let mut config = ExperimentConfig::load(path)
        .with_context(|| format!("loading config {}", path.display()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(name) = strategy {
        config.strategy = Strategy::parse(name)?;
    }
    if let Some(dir) = out {
        config.out_dir = Some(dir);
    }

    let setup = prepare(&config)?;
    let output = run_prepared(&config, &setup)?;
    print_summary(&config, &output);

    if let Some(dir) = &config.out_dir {
        let (jsonl, csv) = emit_metrics(&output.records, dir)?;
        let model_path = dir.join("model.fsnw");
        wire::save(&output.final_model, &model_path)?;
        println!("metrics: {}", jsonl.display());
        println!("metrics: {}", csv.display());
        println!("model:   {}", model_path.display());
    }
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    match ExperimentConfig::load(path) {
        Ok(config) => {
            println!(
                "ok: {} satellites, {} rounds, strategy {}",
                config.constellation.satellite_count(),
                config.rounds,
                config.strategy.name()
            );
            Ok(())
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}

fn compare(path: &Path, out: &Path, baselines: &[String]) -> Result<()> {
    if baselines.is_empty() {
        bail!("--baselines needs at least one strategy name");
    }
    let strategies = baselines
        .iter()
        .map(|name| Strategy::parse(name).map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;

    let base = ExperimentConfig::load(path)
        .with_context(|| format!("loading config {}", path.display()))?;
    // One shared setup: every baseline sees the same data, shards, budgets,
    // schedule, and initial model.
    let setup = prepare(&base)?;

    let mut rows = Vec::new();
    for strategy in strategies {
        let mut config = base.clone();
        config.strategy = strategy;
        let output = run_prepared(&config, &setup)?;
        let dir = out.join(strategy.name());
        emit_metrics(&output.records, &dir)?;
        wire::save(&output.final_model, &dir.join("model.fsnw"))?;
        rows.push(summary_row(&config, &output));
    }

    println!(
        "{:<12} {:>9} {:>9} {:>12} {:>12}",
        "strategy", "final_acc", "best_acc", "gflops", "gbits"
    );
    for row in rows {
        println!(
            "{:<12} {:>9.4} {:>9.4} {:>12.3} {:>12.3}",
            row.strategy, row.final_accuracy, row.best_accuracy, row.gflops, row.gbits
        );
    }
    println!("per-strategy metrics under {}", out.display());
    Ok(())
}

struct SummaryRow {
    strategy: &'static str,
    final_accuracy: f64,
    best_accuracy: f64,
    gflops: f64,
    gbits: f64,
}

fn summary_row(config: &ExperimentConfig, output: &RunOutput) -> SummaryRow {
    let last = output.records.last().expect("runs emit at least one record");
    let best = output
        .records
        .iter()
        .map(|r| r.accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    SummaryRow {
        strategy: config.strategy.name(),
        final_accuracy: last.accuracy,
        best_accuracy: best,
        gflops: last.cumulative_flops / 1e9,
        gbits: last.cumulative_bits / 1e9,
    }
}

fn print_summary(config: &ExperimentConfig, output: &RunOutput) {
    let row = summary_row(config, output);
    println!(
        "{}: {} rounds, final accuracy {:.4}, best {:.4}, {:.3} GFLOPs, {:.3} Gbit moved",
        row.strategy,
        config.rounds,
        row.final_accuracy,
        row.best_accuracy,
        row.gflops,
        row.gbits
    );
}
