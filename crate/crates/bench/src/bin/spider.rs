use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spider_bench::cli;

#[derive(Parser)]
#[command(name = "spider", about = "Sparse traffic sensing experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic traffic series.
    Synth(Common),
    /// Load a traffic series from CSV.
    Ingest(Common),
    /// Train the reconstruction network.
    TrainMtrnet(Common),
    /// Measure reconstruction gain against sampling rate and pick a threshold.
    GainCurve(Common),
    /// Train the selection agent and export its selections.
    TrainAgent(Common),
    /// Train the one-shot selection policy.
    TrainPolicy(Common),
    /// Compare random, historical and learned selection on the test split.
    Evaluate(Common),
    /// Collect report tables into markdown.
    Report(Common),
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let (f, c): (fn(&std::path::Path, u64, &std::path::Path) -> anyhow::Result<()>, Common) = match args.command {
        Command::Synth(c) => (cli::synth, c),
        Command::Ingest(c) => (cli::ingest, c),
        Command::TrainMtrnet(c) => (cli::train_mtrnet_cmd, c),
        Command::GainCurve(c) => (cli::gain_curve_cmd, c),
        Command::TrainAgent(c) => (cli::train_agent_cmd, c),
        Command::TrainPolicy(c) => (cli::train_policy_cmd, c),
        Command::Evaluate(c) => (cli::evaluate_cmd, c),
        Command::Report(c) => (cli::report_cmd, c),
    };
    let run = std::fs::create_dir_all(&c.out_dir).map_err(anyhow::Error::from).and_then(|_| f(&c.config, c.seed, &c.out_dir));
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
