//! `stargaze` command-line driver.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Graph classification and link recommendation for developer networks.
#[derive(Debug, Parser)]
#[command(name = "stargaze", version, about)]
struct Cli {
    /// Worker threads for per-graph work (0 = one per logical core).
    #[arg(long, global = true, env = "STARGAZE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Edge-list JSON keyed by graph id.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Label CSV with an `id,target` header.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-graph statistics, correlations and class summaries.
    Stats {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Train a GCN graph classifier.
    Train {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        arch: Option<u8>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        hidden_dim: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Random forest on embeddings from a trained architecture-4 classifier.
    HybridEval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Override the dataset recorded in the checkpoint.
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_parser = positive)]
        trees: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the fitted forest as forest.json.
        #[arg(long)]
        save_forest: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train a link predictor on one graph and recommend new edges.
    Recommend {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        graph_id: Option<u64>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, value_parser = positive)]
        k: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic dataset in the edge-list/label layout.
    Generate {
        #[arg(long, value_enum)]
        kind: Option<Preset>,
        #[arg(long)]
        graphs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    TwoDensityClasses,
    PlantedPartition,
    UniformRandom,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}
