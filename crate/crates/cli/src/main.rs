//! `constancy` command-line tool.
//!
//! Exit codes: 0 success, 1 domain or contract failure, 2 usage error.

mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use constancy::{Gamma, LossKind, MaskRect, ReportFormat, SceneKind};

use crate::args::{
    parse_estimator, parse_mask, parse_side, parse_triple, positive_f64, positive_usize,
    EstimatorArg, Side,
};

#[derive(Debug, Parser)]
#[command(name = "constancy", version, about = "Illuminant estimation, correction and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the illuminant of one image.
    Estimate(EstimateArgs),
    /// Remove the color cast of one image with a diagonal transform.
    Correct(CorrectArgs),
    /// Train the learned regression head on a manifest.
    Train(TrainArgs),
    /// Cross-validate an estimator on a manifest.
    Evaluate(EvaluateArgs),
    /// Compare analytic loss gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Write a seeded synthetic dataset with a manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ImageArgs {
    /// Input PNG.
    image: PathBuf,
    /// Pixel codes to linear light: linear, srgb or pow(g).
    #[arg(long, default_value = "linear")]
    gamma: Gamma,
    /// Region excluded from estimation, `x0,y0,w,h`.
    #[arg(long, value_parser = parse_mask)]
    mask: Option<MaskRect>,
    /// Working side for learned models: pixels or `native`.
    #[arg(long, default_value = "224", value_parser = parse_side)]
    side: Side,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    image: ImageArgs,
    #[arg(long, default_value = "gray-world", value_parser = parse_estimator)]
    estimator: EstimatorArg,
    /// Ground truth `e1,e2,e3`; adds the angular error in degrees.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    truth: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["illuminant", "estimator"])))]
struct CorrectArgs {
    #[command(flatten)]
    image: ImageArgs,
    /// Illuminant `e1,e2,e3` to divide out.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    illuminant: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<EstimatorArg>,
    /// Output PNG; keeps the input bit depth and gamma.
    #[arg(long)]
    out: PathBuf,
}

/// Hyperparameters of the learned head.
#[derive(Debug, Clone, Args)]
struct HeadArgs {
    #[arg(long, default_value = "l2")]
    loss: LossKind,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05, value_parser = positive_f64)]
    lr: f64,
    #[arg(long, default_value_t = 16, value_parser = positive_usize)]
    batch: usize,
    #[arg(long, default_value_t = 16, value_parser = positive_usize)]
    hidden: usize,
    #[arg(long = "val-fraction", default_value_t = 0.1)]
    val_fraction: f64,
    /// Random translations and horizontal flips before feature extraction.
    #[arg(long)]
    augment: bool,
    #[arg(long = "max-shift", default_value_t = 30)]
    max_shift: usize,
    #[arg(long = "flip-prob", default_value_t = 0.5)]
    flip_prob: f64,
    /// Square working side: pixels or `native`.
    #[arg(long, default_value = "224", value_parser = parse_side)]
    side: Side,
    #[arg(long, default_value = "linear")]
    gamma: Gamma,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    head: HeadArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file (`mlp-v1` text).
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV; defaults to `<out>.report.csv`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// `learned` retrains per fold; `learned:<path>` scores a fixed model.
    #[arg(long, default_value = "gray-world", value_parser = parse_estimator)]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = 3, value_parser = positive_usize)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Report file; stdout always receives the same table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-sample `sample_id,error_deg` CSV.
    #[arg(long)]
    errors: Option<PathBuf>,
    #[command(flatten)]
    head: HeadArgs,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value = "l2")]
    loss: LossKind,
    #[arg(long, default_value_t = 1000, value_parser = positive_usize)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-6, value_parser = positive_f64)]
    h: f64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    n: usize,
    #[arg(long, default_value_t = 64, value_parser = positive_usize)]
    side: usize,
    /// Illuminants are drawn from (1,1,1) ± spread per channel.
    #[arg(long, default_value_t = 0.5)]
    spread: f64,
    #[arg(long, default_value = "gray-mean")]
    kind: SceneKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure of a subcommand after argument parsing.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(constancy::Error),
    /// Completed, but the outcome is a negative verdict (gradcheck).
    Rejected(String),
}

impl From<constancy::Error> for Failure {
    fn from(e: constancy::Error) -> Self {
        Failure::Domain(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Correct(a) => commands::correct(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            let err = Cli::command().error(clap::error::ErrorKind::ValueValidation, msg);
            let _ = err.print();
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Rejected(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
