//! `mieeg`: synthesize, run, inspect and report motor-imagery EEG
//! classification experiments.
//!
//! Exit status is 0 on success, 1 on a runtime failure and 2 on a usage
//! error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mieeg", version, about = "Offline motor-imagery EEG classification")]
struct Cli {
    /// More log output on stderr (-v debug, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus as EPB1 files plus a manifest.
    Synth(SynthArgs),
    /// Run the full pipeline and write results, reports and models.
    Run(RunArgs),
    /// Describe an EPB1 data file or an MDL1 model file.
    Inspect(InspectArgs),
    /// Rebuild the comparison report from a results.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of subjects.
    #[arg(long, default_value_t = 52, value_parser = clap::value_parser!(u16).range(1..))]
    pub subjects: u16,
    /// Epochs per subject.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u16).range(2..))]
    pub channels: u16,
    /// Samples per epoch.
    #[arg(long, default_value_t = 1536, value_parser = clap::value_parser!(u32).range(1..))]
    pub samples: u32,
    #[arg(long, default_value_t = 512.0)]
    pub sample_rate: f64,
    /// Amplitude of the class-dependent oscillation; 0 gives pure noise.
    #[arg(long, default_value_t = 20.0)]
    pub strength: f64,
    #[arg(long, default_value_t = 10.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, short, env = "MIEEG_OUT", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// EPB1 files or directories containing them. Without inputs a synthetic
    /// corpus is generated from the synthetic.* settings.
    pub inputs: Vec<PathBuf>,
    /// Flat key = value file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated: qda, fine-knn, cos-knn, wide-nn.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Comma-separated channel names, or "all".
    #[arg(long)]
    pub channels: Option<String>,
    /// epoch-mean, per-channel or off.
    #[arg(long)]
    pub outliers: Option<String>,
    #[arg(long)]
    pub low_hz: Option<f64>,
    #[arg(long)]
    pub high_hz: Option<f64>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub no_filter: bool,
    #[arg(long)]
    pub no_car: bool,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    /// Z-score features with training statistics.
    #[arg(long)]
    pub standardize: bool,
    /// Cross-validation folds on the training portion (0 disables).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Subjects processed in parallel.
    #[arg(long, short = 'j', value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Synthetic corpus size when no inputs are given.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub subjects: Option<u16>,
    #[arg(long)]
    pub strength: Option<f64>,
    /// Seed of the synthetic corpus.
    #[arg(long)]
    pub synth_seed: Option<u64>,
    /// Also write filter response, outlier and feature CSVs.
    #[arg(long)]
    pub diagnostics: bool,
    /// Any config key, e.g. --set nn.hidden=20. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, short, env = "MIEEG_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A results.csv written by `run`.
    pub results: PathBuf,
    /// Directory for the report files; defaults to the results directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Leave out the published comparison rows.
    #[arg(long)]
    pub no_baselines: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("MIEEG_LOG")
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Run(a) => commands::run(&a),
        Command::Inspect(a) => commands::inspect(&a),
        Command::Report(a) => commands::report(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
