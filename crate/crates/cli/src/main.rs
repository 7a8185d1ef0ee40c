use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cmd;
mod manifest;

#[derive(Parser, Debug)]
#[command(
    name = "dollo",
    version,
    about = "Dated phylogenies from binary trait data under the stochastic Dollo model"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a trait matrix on a known tree.
    Simulate(cmd::simulate::SimulateArgs),
    /// Sample dated trees and the death rate by MCMC.
    Infer(cmd::infer::InferArgs),
    /// Clade supports, ages and a consensus tree from traces.
    Summarize(cmd::summarize::SummarizeArgs),
    /// Posterior predictive checks of singleton counts and the frequency spectrum.
    Ppc(cmd::ppc::PpcArgs),
    /// Two-taxon closed forms: distance estimate and posterior curve.
    TwoLeaf(cmd::two_leaf::TwoLeafArgs),
    /// Effective sample sizes and autocorrelations of a trace.
    Diagnose(cmd::diagnose::DiagnoseArgs),
}

/// Output directory shared by the commands that write files.
#[derive(Args, Debug)]
struct OutDir {
    /// Directory for outputs; created if missing.
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Simulate(a) => cmd::simulate::run(a),
        Command::Infer(a) => cmd::infer::run(a),
        Command::Summarize(a) => cmd::summarize::run(a),
        Command::Ppc(a) => cmd::ppc::run(a),
        Command::TwoLeaf(a) => cmd::two_leaf::run(a),
        Command::Diagnose(a) => cmd::diagnose::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad input or configuration, 2 for failures while running.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<dollo_core::Error>() {
            return match core {
                dollo_core::Error::Io(_) => 2,
                _ => 1,
            };
        }
    }
    2
}
