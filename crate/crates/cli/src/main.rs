use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nibb_cli::{run_command, Command, Overrides};

/// Nonintersecting Brownian bridge toolkit: samplers, limit shapes and edge
/// statistics.
#[derive(Parser)]
#[command(name = "nibb", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Sample bridge trajectories and write the ensemble.
    Simulate(CommonArgs),
    /// Solve the limit shape and write it as JSON.
    Limitshape(CommonArgs),
    /// Edge-fluctuation statistics against the Tracy–Widom reference.
    Edgestats(CommonArgs),
    /// Rigidity report and Stieltjes concentration.
    Rigidity(CommonArgs),
    /// Stochastic-dominance test for shifted terminal data.
    Dominance(CommonArgs),
    /// Evaluate the Tracy–Widom GUE CDF or export its table.
    Tw2(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Limitshape(a) => (Command::LimitShape, a),
        Sub::Edgestats(a) => (Command::EdgeStats, a),
        Sub::Rigidity(a) => (Command::Rigidity, a),
        Sub::Dominance(a) => (Command::Dominance, a),
        Sub::Tw2(a) => (Command::Tw2, a),
    };
    let overrides = Overrides {
        seed: args.seed,
        workers: args.workers,
    };
    match run_command(command, &args.config, &args.out, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = if err.is_validation() {
                "validation"
            } else {
                "numerical"
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": err.to_string(), "kind": kind })
            );
            if err.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
