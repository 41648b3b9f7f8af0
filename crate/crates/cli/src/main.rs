//! Command-line surface: block/network analyzer, segmentation inference,
//! dice evaluation, loss gradient verification, fold splitting.
//!
//! Exit codes: 0 ok, 1 check failure, 2 config error, 3 missing artifact,
//! 4 partial failure.

mod cmd;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "hardnet",
    version,
    about = "HarDNetV2 block compiler, cost analyzer and segmentation pipeline"
)]
struct Cli {
    /// Worker thread cap (overrides the HDK_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cost-analyze a network config, or compare two block specs.
    Analyze(cmd::analyze::Args),
    /// Segment a directory of P6 images into P5 masks.
    Infer(cmd::infer::Args),
    /// Dice-score predicted masks against ground truth.
    Eval(cmd::eval::Args),
    /// Verify analytic loss gradients against finite differences.
    Gradcheck(cmd::gradcheck::Args),
    /// Assign sample ids to k folds with a seeded shuffle.
    SplitFolds(cmd::folds::Args),
}

fn thread_cap(cli_threads: Option<usize>) -> Option<usize> {
    cli_threads.or_else(|| {
        std::env::var("HDK_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
    })
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = thread_cap(cli.threads) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    let code = match cli.command {
        Command::Analyze(args) => cmd::analyze::run(&args),
        Command::Infer(args) => cmd::infer::run(&args),
        Command::Eval(args) => cmd::eval::run(&args),
        Command::Gradcheck(args) => cmd::gradcheck::run(&args),
        Command::SplitFolds(args) => cmd::folds::run(&args),
    };
    let code = match code {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}
