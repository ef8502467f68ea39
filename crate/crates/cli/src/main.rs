//! `ttfs-sim`: train a ReLU network, convert it to a time-to-first-spike
//! network, optimize its kernels and run it.
//!
//! Exit codes: 0 on success, 1 for user errors (missing files, bad configs
//! or flags, incompatible shapes), 2 when an internal invariant breaks
//! (diverging optimizer, non-finite training loss).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser, Debug)]
#[command(
    name = "ttfs-sim",
    version,
    about = "Time-to-first-spike conversion and simulation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a ReLU network on IDX data and store it with activation statistics.
    Train(TrainArgs),
    /// Normalize a trained model and attach the starting kernel.
    Convert(ConvertArgs),
    /// Fit every layer's kernel to its activation statistics.
    Optimize(OptimizeArgs),
    /// Simulate a converted model and report accuracy, spikes, latency and energy.
    Run(RunArgs),
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory with the four MNIST IDX files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// `mlp` or `cnn`.
    #[arg(long)]
    pub arch: Option<String>,
    /// Hidden layer widths of the MLP, comma separated.
    #[arg(long)]
    pub hidden: Option<String>,
    /// Channel counts of the two CNN convolutions, comma separated.
    #[arg(long)]
    pub channels: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use only the first N training samples.
    #[arg(long)]
    pub max_train: Option<usize>,
    /// Use only the first N test samples.
    #[arg(long)]
    pub max_test: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ConvertArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Time window T of each phase.
    #[arg(long = "time-window", visible_alias = "T")]
    pub time_window: Option<u32>,
    /// Starting kernel time constant; defaults to T/4.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Starting kernel delay.
    #[arg(long)]
    pub td: Option<f64>,
    /// `max`, or a percentile in (0, 100] of each layer's positive activations.
    #[arg(long)]
    pub normalization: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub tau_floor: Option<f64>,
    #[arg(long)]
    pub divergence_limit: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-iteration losses and kernels as CSV.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory with MNIST IDX files; the test split is used.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// `baseline` or `early-firing`.
    #[arg(long)]
    pub schedule: Option<String>,
    /// `ttfs` or `rate`.
    #[arg(long)]
    pub coding: Option<String>,
    /// Time window for TTFS coding; number of steps for rate coding.
    #[arg(long = "T", visible_alias = "time-window")]
    pub time_window: Option<u32>,
    /// `event-driven` or `dense`.
    #[arg(long)]
    pub engine: Option<String>,
    /// Spike trace CSV of one sample.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Sample index for --trace.
    #[arg(long)]
    pub trace_sample: Option<usize>,
    /// Report as one JSON line.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Accuracy at every multiple of T/4 as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Kernel lookup tables `eps(0..T-1)` of every layer as CSV.
    #[arg(long)]
    pub kernel_table: Option<PathBuf>,
    /// Run only the first N samples.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Leave input encoder spikes out of spike and energy figures.
    #[arg(long)]
    pub exclude_input_spikes: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err
        .chain()
        .filter_map(|e| e.downcast_ref::<ttfs_core::Error>())
        .any(|e| !e.is_user_error());
    if internal {
        2
    } else {
        1
    }
}

/// The error chain, skipping causes whose text the previous message already shows.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Convert(a) => commands::convert(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Run(a) => commands::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
