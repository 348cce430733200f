//! `phonoeeg`: synthetic data, featurisation, training, evaluation and
//! figures for the hierarchical imagined-speech EEG pipeline.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phonoeeg_core::pipeline::labels::TaskId;

#[derive(Debug, Parser)]
#[command(name = "phonoeeg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic trial container.
    Synth(SynthArgs),
    /// Write the default run configuration.
    InitConfig {
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute and store one covariance matrix per trial.
    Featurize(DataArgs),
    /// Fit one model bundle per task with the configured split (hold-out by default).
    Train(DataArgs),
    /// Score a container with previously trained bundles.
    Evaluate(EvaluateArgs),
    /// Leave-one-subject-out cross-validation.
    Crossval(DataArgs),
    /// Bar chart and tables from one or more reports.
    Plot(PlotArgs),
}

/// Options shared by the commands that run the pipeline.
#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON). Built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, env = "PHONOEEG_SEED")]
    seed: Option<u64>,
    /// Output directory; overrides the config `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated tasks, e.g. `bilabial,nasal`; overrides the config list.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<TaskId>>,
    /// Worker threads (0 = one per core); overrides the config value.
    #[arg(long, env = "PHONOEEG_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Trial container directory.
    #[arg(long)]
    data: PathBuf,
    /// Replace the real labels by a seeded permutation (null control).
    #[arg(long)]
    shuffle_labels: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory written by `train`.
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<TaskId>>,
    #[arg(long, env = "PHONOEEG_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 8)]
    channels: usize,
    #[arg(long, default_value_t = 3)]
    subjects: usize,
    /// Samples per trial.
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = 256.0)]
    sample_rate: f64,
    /// Strength of the class-specific covariance component; 0 = no signal.
    #[arg(long, default_value_t = 1.0)]
    separability: f64,
    /// Task whose labels carry the class structure.
    #[arg(long, default_value = "bilabial")]
    target_task: TaskId,
    #[arg(long, env = "PHONOEEG_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Report files, optionally labelled as `LABEL=PATH`.
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<String>,
    /// Latent-code CSV written by `train` or `crossval`; adds a projection plot.
    #[arg(long)]
    latent: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
