use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpmiss_cli::commands::{audit, predict, synth_bench, AuditArgs, PredictArgs, SynthBenchArgs};

#[derive(Parser)]
#[command(name = "cpmiss", version, about = "Conformal prediction with missing covariates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo coverage benchmark on synthetic data.
    SynthBench(Box<SynthBenchArgs>),
    /// Prediction intervals for query rows from a training CSV.
    Predict(PredictArgs),
    /// Marginal and per-mask coverage of an interval file.
    Audit(AuditArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SynthBench(a) => synth_bench(a),
        Command::Predict(a) => predict(a),
        Command::Audit(a) => audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
