//! `kronml` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kronml::eval::Classifier;

#[derive(Parser, Debug)]
#[command(name = "kronml", version, about = "Kronecker coefficient vanishing classifiers: data, training and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 42, env = "KRONML_SEED")]
    pub seed: u64,
    /// Directory for all output files.
    #[arg(long, global = true, default_value = "out", env = "KRONML_OUT_DIR")]
    pub out_dir: PathBuf,
    /// Worker threads for generation, labeling and neighbor search
    /// (default: all cores). CNN training is always single-threaded.
    #[arg(long, global = true, env = "KRONML_THREADS")]
    pub threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build (or validate a cached) character table.
    Chartab {
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..=20))]
        n: u16,
    },
    /// Label every depth-filtered triple and write the dataset.
    Gen {
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..=20))]
        n: u16,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        encoding: u8,
        /// Also write a balanced split manifest with this per-class cap.
        #[arg(long)]
        cap: Option<usize>,
        /// Write a balanced split manifest (implied by --cap).
        #[arg(long)]
        split: bool,
    },
    /// Train one model on the training part of a split and save it.
    Train(ModelArgs),
    /// Train and evaluate, with repetitions, writing json, text and figure
    /// reports.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
    },
    /// Reproduce the published accuracy table (1) or confusion matrices (2).
    Repro {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        table: u8,
        /// Only this n (default: 12, 13 and 14).
        #[arg(long, value_parser = clap::value_parser!(u16).range(12..=14))]
        n: Option<u16>,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        /// Train on this share of each class of the training split.
        #[arg(long)]
        subsample: Option<f64>,
        /// Boosting rounds for LGBM.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Run the character and Kronecker self-check suites.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
        level: LevelArg,
        /// Largest n checked (default: 8 for fast, 14 for full).
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..=20))]
        n: Option<u16>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_parser = parse_classifier)]
    pub model: Classifier,
    #[arg(long, value_parser = clap::value_parser!(u16).range(6..=20))]
    pub n: u16,
    /// Read this dataset file instead of generating one.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Per-class cap of the balanced set (default: the published size for
    /// n = 12, 13, 14, otherwise unlimited).
    #[arg(long)]
    pub cap: Option<usize>,
    /// Train on this share of each class of the training split.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Number of neighbors (nearn). Without it the k sweep picks the best.
    #[arg(long)]
    pub k: Option<usize>,
    /// Training epochs (cnn2, cnn3).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate (cnn2, cnn3, lgbm).
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Boosting rounds (lgbm).
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LevelArg {
    Fast,
    Full,
}

fn parse_classifier(s: &str) -> Result<Classifier, String> {
    s.parse().map_err(|e: kronml::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.global.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
