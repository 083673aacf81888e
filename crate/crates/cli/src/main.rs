use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use asyncgp_cli::*;
use asyncgp_core::{AggregatorKind, KernelSpec};
use asyncgp_simnet::Mode;

/// Asynchronous distributed GP regression experiments.
#[derive(Parser)]
#[command(name = "asyncgp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (regression or control) and write a run directory.
    Run(RunArgs),
    /// Compare aggregators across run directories sharing one event stream.
    Compare(CompareArgs),
    /// Kernel utilities.
    Kernels(KernelsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in preset: table2 or table2-stalled.
    #[arg(long, default_value = "table2", conflicts_with = "config")]
    preset: String,
    /// Scenario JSON file (overrides --preset).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Aggregator to run, or `all` for all six on the same stream.
    #[arg(long, default_value = "asyncdgp")]
    aggregator: String,
    /// Information set capacity 𝔍̄.
    #[arg(long)]
    ibar: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated horizon in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// regression | control.
    #[arg(long)]
    mode: Option<String>,
    /// Output root (default: $ASYNCGP_OUT or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories produced by `asyncgp run`.
    #[arg(required = true)]
    run_dirs: Vec<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct KernelsArgs {
    #[command(subcommand)]
    command: KernelsCommand,
}

#[derive(Subcommand)]
enum KernelsCommand {
    /// Print the closed-form Lipschitz constant, optionally checked against
    /// the numerical maximization oracle.
    Lipschitz(LipschitzArgs),
}

#[derive(Args)]
struct LipschitzArgs {
    /// linear | se | ard-se | rq | periodic.
    #[arg(long)]
    family: String,
    /// Hyperparameters as key=value pairs, e.g. "sigma_f=1,sigma_l=2,dim=2".
    #[arg(long, default_value = "")]
    params: String,
    /// Run the grid + golden-section oracle and report agreement.
    #[arg(long)]
    oracle: bool,
    /// Search interval upper end (default: family-specific).
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    grid: usize,
    /// Emit machine-readable JSON instead of the one-line report.
    #[arg(long)]
    json: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let scenario = match args.config {
                Some(path) => ScenarioChoice::File { path },
                None => ScenarioChoice::Preset { name: args.preset },
            };
            let aggregator = match args.aggregator.as_str() {
                "all" => None,
                other => Some(other.parse::<AggregatorKind>()?),
            };
            let mode = match args.mode.as_deref() {
                None => None,
                Some("regression") => Some(Mode::Regression),
                Some("control") => Some(Mode::Control),
                Some(other) => anyhow::bail!("unknown mode `{other}`"),
            };
            let opts = RunOptions {
                scenario,
                aggregator,
                info_capacity: args.ibar,
                seed: args.seed,
                duration_s: args.duration,
                mode,
                out_root: resolve_out_root(args.out.as_deref()),
            };
            let dirs = run_experiment(&opts)?;
            for dir in dirs {
                println!("wrote {}", dir.display());
            }
        }
        Command::Compare(args) => {
            let report = compare_report(&args.run_dirs)?;
            print!("{}", format_compare_table(&report));
            if let Some(path) = args.json {
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Kernels(args) => match args.command {
            KernelsCommand::Lipschitz(l) => {
                let spec = KernelSpec::from_params(&l.family, &l.params)?;
                let report = kernel_report(&spec, l.oracle, l.d_max, l.grid)?;
                if l.json {
                    println!("{}", serde_json::to_string_pretty(&report)?);
                } else {
                    println!("{}", format_kernel_line(&spec, &report));
                }
            }
        },
    }
    Ok(())
}
