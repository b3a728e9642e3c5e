use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hashlab::model::Method;

mod commands;
mod config;
mod error;

use config::{Overrides, QueryPolicy};

#[derive(Parser)]
#[command(name = "hashlab", version, about = "Train binary hash codes and evaluate Hamming-ranking retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset, report its shape, and write the query/database feature files.
    Ingest(ExperimentArgs),
    /// Fit one method at one code length on the database set.
    Train(ExperimentArgs),
    /// Encode a feature file with a trained model.
    Encode(EncodeArgs),
    /// Rank database codes for every query and write the metric report.
    Eval(EvalArgs),
    /// Train, encode and score every (method, bits) pair of the config.
    Sweep(ExperimentArgs),
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// JSON experiment config; flags below override its keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Dataset kind (mnist or cifar10).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Method, or a comma-separated list for sweep.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    /// Code length, or a comma-separated list for sweep.
    #[arg(long, value_delimiter = ',')]
    bits: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_policy)]
    query_policy: Option<QueryPolicy>,
    #[arg(long)]
    query_count: Option<usize>,
    #[arg(long)]
    database_size: Option<usize>,
    /// Training epochs for the network.
    #[arg(long)]
    epochs: Option<usize>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset.clone(),
            data_dir: self.data_dir.clone(),
            method: self.method.clone(),
            bits: self.bits.clone(),
            seed: self.seed,
            query_policy: self.query_policy,
            query_count: self.query_count,
            database_size: self.database_size,
            epochs: self.epochs,
            output: self.out.clone(),
        }
    }
}

fn parse_policy(s: &str) -> Result<QueryPolicy, String> {
    match s {
        "test-split" => Ok(QueryPolicy::TestSplit),
        "holdout" => Ok(QueryPolicy::Holdout),
        _ => Err(format!("unknown query policy {s:?}; expected test-split or holdout")),
    }
}

#[derive(Args)]
struct EncodeArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Feature file (HLFM) with one row per item.
    #[arg(long)]
    input: PathBuf,
    /// Output code file (HLBC).
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    database: PathBuf,
    #[arg(long)]
    query_labels: PathBuf,
    #[arg(long)]
    db_labels: PathBuf,
    /// Config supplying the eval section, method name and seed.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Report precision within every radius 0..=bits.
    #[arg(long)]
    radius_sweep: bool,
    /// Cutoffs for precision@k (comma-separated).
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Hamming radii (comma-separated).
    #[arg(long, value_delimiter = ',')]
    radius: Option<Vec<usize>>,
    /// Method name recorded in summary.json.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a.config.as_deref(), &a.overrides()),
        Command::Train(a) => commands::train(a.config.as_deref(), &a.overrides()),
        Command::Sweep(a) => commands::sweep(a.config.as_deref(), &a.overrides()),
        Command::Encode(a) => commands::encode(&a.model, &a.input, &a.out),
        Command::Eval(a) => commands::eval(commands::EvalRequest {
            queries: a.queries,
            database: a.database,
            query_labels: a.query_labels,
            db_labels: a.db_labels,
            config: a.config,
            radius_sweep: a.radius_sweep,
            ks: a.k,
            radii: a.radius,
            method: a.method,
            seed: a.seed,
            out: a.out,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
