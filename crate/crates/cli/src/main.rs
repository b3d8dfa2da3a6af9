//! `submax`: experiment driver for distributed submodular maximization.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 runtime failure.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "submax",
    version,
    about = "Distributed submodular maximization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an instance file from a ratings CSV or a synthetic spec.
    Ingest(IngestArgs),
    /// Run one seeded iteration and write its trace.
    Run(RunArgs),
    /// Run independent seeded trials and average their J^k curves.
    Montecarlo(RunArgs),
    /// Check a result against its instance.
    Verify(VerifyArgs),
    /// Greedy, brute-force or equilibrium-enumeration baselines.
    Baseline(BaselineArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["ratings", "synth"])))]
pub struct IngestArgs {
    /// `userId,movieId,rating[,timestamp]` CSV with a header row.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Synthetic spec such as `I=4,K=5,U=30,d=0.2`.
    #[arg(long)]
    pub synth: Option<String>,
    /// Like threshold: a rating at or above this counts as a like.
    #[arg(long, default_value_t = 3.0)]
    pub rbar: f64,
    #[arg(long, default_value_t = 300)]
    pub min_likers: usize,
    /// Keep only the most liked movies.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Agent count written to the instance header (ratings mode).
    #[arg(long, default_value_t = 10)]
    pub agents: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// off, non-flat, distinguishable or strict-equilibria (synthetic mode).
    #[arg(long, default_value = "non-flat")]
    pub tie_check: String,
    /// Also write the movie id behind each strategy, one per line.
    #[arg(long)]
    pub movie_ids: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags shared by `run` and `montecarlo`; each overrides the config file.
#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Flat `key = value` manifest to start from.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// alg1 or alg2.
    #[arg(long)]
    pub alg: Option<String>,
    /// Step size, or `auto` for min(0.0005, 1/estimated Δmax).
    #[arg(long)]
    pub gamma: Option<String>,
    /// Samples per gradient estimate.
    #[arg(long = "M", alias = "sample-size")]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eps_vertex: Option<f64>,
    #[arg(long)]
    pub eps_eq: Option<f64>,
    #[arg(long)]
    pub check_every: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stop_on_equilibrium: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub include_empty_strategy: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub delta_max_includes_empty: Option<bool>,
    /// Built-in graph (complete, string, ring, star, general10), an edge-list file, or none.
    #[arg(long)]
    pub topology: Option<String>,
    /// Subtracted from every hop distance to give the delay.
    #[arg(long)]
    pub hop_offset: Option<usize>,
    /// empty or uniform.
    #[arg(long)]
    pub bootstrap: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Also write the probability trajectory.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub probs: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("subject").required(true).args(["result", "profile"])))]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// `result.json` written by `run`.
    #[arg(long)]
    pub result: Option<PathBuf>,
    /// Comma-separated strategy indices, `-` for an empty slot.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, default_value_t = 1e-12)]
    pub eps_eq: f64,
    /// Oracle-call budget for the brute-force comparison.
    #[arg(long, default_value_t = submax::DEFAULT_ENUMERATION_LIMIT)]
    pub limit: u64,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// greedy, brute-force or equilibria.
    #[arg(long, default_value = "greedy")]
    pub method: String,
    /// Agent order for greedy, comma-separated.
    #[arg(long)]
    pub order: Option<String>,
    /// weak or strict (equilibria).
    #[arg(long, default_value = "weak")]
    pub tie_rule: String,
    #[arg(long, default_value_t = 1e-12)]
    pub eps_eq: f64,
    #[arg(long, default_value_t = submax::DEFAULT_ENUMERATION_LIMIT)]
    pub limit: u64,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("SUBMAX_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "SUBMAX_THREADS must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Run(a) => commands::run(&a),
        Command::Montecarlo(a) => commands::montecarlo(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Baseline(a) => commands::baseline(&a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
