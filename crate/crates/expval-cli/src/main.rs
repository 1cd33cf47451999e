//! Command-line runner for expectation-value experiments and self-check
//! suites.

use anyhow::{bail, Context, Result};
use clap::Parser;
use expval::experiment::{run_experiment, run_suite, ExperimentConfig};
use std::path::PathBuf;

/// Evaluate a configured scenario with every requested method, or run one
/// of the named self-check suites.
#[derive(Debug, Parser)]
#[command(name = "expval", version, group = clap::ArgGroup::new("action").required(true).args(["config", "suite"]))]
struct Cli {
    /// Path to an experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Directory for report.json and orders.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the configured expansion order.
    #[arg(long)]
    order: Option<usize>,

    /// Pin the slice count (disables the convergence doubling).
    #[arg(long)]
    slices: Option<usize>,

    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Run a self-check suite: linearity, scaling, closure or distinctness.
    #[arg(long)]
    suite: Option<String>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();

    if let Some(name) = &cli.suite {
        let report = run_suite(name, cli.seed.unwrap_or(0))?;
        print!("{}", report.render());
        if !report.passed() {
            std::process::exit(1);
        }
        return Ok(());
    }

    let path = cli.config.as_ref().expect("clap guarantees config xor suite");
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(order) = cli.order {
        if order == 0 {
            bail!("--order must be at least 1");
        }
        config.max_order = order;
    }
    if let Some(n) = cli.slices {
        if n == 0 {
            bail!("--slices must be at least 1");
        }
        config.slices.initial_slices = n;
        config.slices.max_slices = n;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let report = run_experiment(&config, &cli.out)?;
    println!("scenario: {} (observable {})", report.label, report.observable);
    for m in &report.methods {
        match (&m.error, m.value) {
            (Some(err), _) => println!("  {:<22} skipped: {err}", m.method),
            (None, Some(value)) => {
                let residual = m
                    .residual_vs_exact
                    .map(|r| format!(", residual vs exact {r:.3e}"))
                    .unwrap_or_default();
                println!(
                    "  {:<22} {value:.12}{residual} (N = {}, converged = {})",
                    m.method, m.n_slices, m.converged
                );
            }
            (None, None) => println!("  {:<22} produced no value", m.method),
        }
    }
    println!(
        "wrote {} and {}",
        cli.out.join("report.json").display(),
        cli.out.join("orders.csv").display()
    );
    Ok(())
}
