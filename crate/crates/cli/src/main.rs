use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dnaood::ErrorKind;

mod commands;
mod settings;

/// DNA-barcode-assisted out-of-distribution detection for image classifiers.
#[derive(Debug, Parser)]
#[command(name = "dnaood", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pairwise distance matrix of an aligned FASTA file, as CSV.
    Distances(DistancesArgs),
    /// Score, order and evaluate one outlier experiment.
    Evaluate(EvaluateArgs),
    /// Evaluate the DNA quantile ordering over a grid of q values.
    SweepQ(SweepArgs),
    /// Correlate outlier prediction proportions with DNA distance.
    Correlate(CorrelateArgs),
    /// Generate a synthetic barcode set and logit tables.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// `key = value` file supplying any of the long options; flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Aligned barcodes.
    #[arg(long)]
    fasta: Option<PathBuf>,
    /// `raw` or `k80` [default: k80]
    #[arg(long)]
    distance: Option<dnaood::DistanceMethod>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Logit table CSV.
    #[arg(long)]
    logits: Option<PathBuf>,
    /// Class map CSV defining the logit column order.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Aligned barcodes covering every class and the outlier taxon.
    #[arg(long)]
    fasta: Option<PathBuf>,
    /// Taxon held out of training.
    #[arg(long)]
    outlier: Option<String>,
    /// msp, max-logit, energy, entropy, ratio-logit or ratio-softmax [default: entropy]
    #[arg(long)]
    method: Option<dnaood::OodMethod>,
    /// `raw` or `k80` [default: k80]
    #[arg(long)]
    distance: Option<dnaood::DistanceMethod>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// baseline, dna or dna-quantile [default: dna-quantile]
    #[arg(long)]
    reordering: Option<String>,
    /// Quantile for dna-quantile [default: 0.4]
    #[arg(long)]
    q: Option<f64>,
    /// Directory receiving report.json, curves.csv and ranking.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated q values [default: 0, 0.05, ..., 1]
    #[arg(long)]
    grid: Option<String>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// CSV with columns outlier_taxon,logits,class_map; paths relative to it.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Aligned barcodes covering every taxon in the experiments.
    #[arg(long)]
    fasta: Option<PathBuf>,
    /// `raw` or `k80` [default: k80]
    #[arg(long)]
    distance: Option<dnaood::DistanceMethod>,
    /// Permutations for the p-value [default: 10000]
    #[arg(long)]
    permutations: Option<usize>,
    /// Permutation seed [default: 24301]
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving correlation.json and scatter.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// [default: 39]
    #[arg(long)]
    n_classes: Option<usize>,
    /// [default: 50]
    #[arg(long)]
    images_per_class: Option<usize>,
    /// Index of the held-out taxon [default: 0]
    #[arg(long)]
    outlier_index: Option<usize>,
    /// Strength in [0, 1] tying outlier predictions to DNA proximity [default: 1]
    #[arg(long)]
    coupling: Option<f64>,
    /// Standard deviation of the logit noise [default: 1]
    #[arg(long)]
    logit_noise: Option<f64>,
    /// [default: 658]
    #[arg(long)]
    barcode_length: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Write one experiment per taxon instead of only the configured outlier.
    #[arg(long)]
    all_outliers: bool,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let computation = err
        .chain()
        .filter_map(|e| e.downcast_ref::<dnaood::Error>())
        .any(|e| e.kind() == ErrorKind::Computation);
    if computation {
        2
    } else {
        1
    }
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn run(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
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
    let result = match cli.command {
        Command::Distances(a) => commands::distances(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::SweepQ(a) => commands::sweep_q(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

fn main() -> ExitCode {
    run(std::env::args_os())
}
