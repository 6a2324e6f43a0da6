//! budgetsched: allocate a fixed reasoning-token budget across a batch of
//! queries to maximize expected accuracy.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 data error,
//! 3 external-service error.

mod commands;
mod data;
mod errors;
mod report;
mod settings;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{ArgAction, Parser, Subcommand};

use crate::errors::{CliResult, EXIT_USAGE};
use crate::settings::{resolve, ConfigFile, Ctx};

#[derive(Parser)]
#[command(name = "budgetsched", version, about = "Budget-aware batch allocation pipeline")]
struct Cli {
    /// Seed for every randomized step; echoed into manifests.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory all outputs are written under.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps, probing, and layer analysis.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// key = value config file; explicit flags win on conflict.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled batch with feature vectors.
    Synth(commands::synth::SynthArgs),
    /// Label profiles by percentile thresholds on max-budget accuracy.
    Label(commands::label::LabelArgs),
    /// Train one predictor on a feature layer.
    Train(commands::train::TrainArgs),
    /// Hyperparameter sweep over predictor configurations.
    Sweep(commands::train::SweepArgs),
    /// Per-layer predictor comparison.
    Layers(commands::train::LayersArgs),
    /// Run a checkpoint over features and dump predictions.
    Predict(commands::predict::PredictArgs),
    /// Evaluate allocation strategies across budgets.
    Allocate(commands::allocate::AllocateArgs),
    /// Estimate profiles empirically through a generation client.
    Probe(commands::probe::ProbeArgs),
    /// Emit few-shot difficulty prompts for a questions file.
    FewshotPrompt(commands::fewshot::FewshotPromptArgs),
    /// Parse few-shot classification responses into labels.
    FewshotParse(commands::fewshot::FewshotParseArgs),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let ctx = Ctx {
        seed: resolve(cli.seed, &config, "seed", 0)?,
        out: resolve(cli.out.clone(), &config, "out", PathBuf::from("."))?,
        jobs: resolve(cli.jobs, &config, "jobs", 1)?,
        config,
    };
    if ctx.jobs == 0 {
        return Err(errors::CliError::Usage("--jobs must be >= 1".to_string()));
    }
    match &cli.command {
        Command::Synth(args) => commands::synth::run(&ctx, args),
        Command::Label(args) => commands::label::run(&ctx, args),
        Command::Train(args) => commands::train::run_train(&ctx, args),
        Command::Sweep(args) => commands::train::run_sweep(&ctx, args),
        Command::Layers(args) => commands::train::run_layers(&ctx, args),
        Command::Predict(args) => commands::predict::run(&ctx, args),
        Command::Allocate(args) => commands::allocate::run(&ctx, args),
        Command::Probe(args) => commands::probe::run(&ctx, args),
        Command::FewshotPrompt(args) => commands::fewshot::run_prompt(&ctx, args),
        Command::FewshotParse(args) => commands::fewshot::run_parse(&ctx, args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(0);
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(EXIT_USAGE);
        }
    };

    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .filter_level(level)
        .init();

    match dispatch(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
