use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;

#[derive(Parser, Debug)]
#[command(
    name = "chsim",
    version,
    about = "Chiarella-Heston market simulator, calibration and hedging toolkit"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file overriding built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate price paths and write a scenario file.
    Simulate(commands::SimulateArgs),
    /// Stylized facts of a price history or scenario file.
    Stats(commands::StatsArgs),
    /// Calibrate the model (and optionally the reference models) to history.
    Calibrate(commands::CalibrateArgs),
    /// Compare two sources by GSL-div against a reference and a Welch test.
    Validate(commands::ValidateArgs),
    /// Write the training scenario file for the hedging agent.
    ExportTrainingSet(commands::ExportArgs),
    /// Evaluate a hedging policy across transaction-cost levels.
    HedgeEval(commands::HedgeEvalArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = commands::Context::new(&cli.global).and_then(|ctx| match cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Calibrate(a) => commands::calibrate(&ctx, a),
        Command::Validate(a) => commands::validate(&ctx, a),
        Command::ExportTrainingSet(a) => commands::export_training_set(&ctx, a),
        Command::HedgeEval(a) => commands::hedge_eval(&ctx, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
