//! `mapf`: solve, collect expert data, export datasets, evaluate suites,
//! validate solutions and inspect policy outputs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mapf::Shield;

#[derive(Parser)]
#[command(name = "mapf", version, about = "Gridworld multi-agent path finding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one instance and write the solution.
    Solve(SolveArgs),
    /// Run the prioritized planner over many instances in parallel.
    Collect(CollectArgs),
    /// Turn collected solutions into a training dataset.
    ExportDataset(ExportArgs),
    /// Run methods over a suite and write a CSV of episode metrics.
    Evaluate(EvaluateArgs),
    /// Check a solution file for collisions and completeness.
    Validate(ValidateArgs),
    /// Print each agent's action distribution for one state.
    Infer(InferArgs),
}

#[derive(Args, Clone)]
struct LimitArgs {
    /// Wall-clock budget per episode in seconds, 0 for none.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    /// Step limit as a multiple of the largest start distance.
    #[arg(long, default_value_t = 3)]
    step_multiplier: u32,
    /// Absolute step limit, overriding the multiplier.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Clone)]
struct PolicyArgs {
    /// Weights file for policy:neural.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Field-of-view radius; must match the weights if given.
    #[arg(long)]
    radius: Option<usize>,
    /// Maximum neighbors per agent in the communication graph.
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    /// Random priority orders the oracle tries after the first.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
}

#[derive(Args)]
pub struct SolveArgs {
    /// pibt | oracle | policy:greedy | policy:random | policy:neural
    #[arg(long)]
    method: String,
    /// naive | pibt-sort | pibt-sample (policy methods only)
    #[arg(long)]
    shield: Option<Shield>,
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    scen: PathBuf,
    #[arg(long)]
    agents: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    limits: LimitArgs,
    /// Solution file; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CollectArgs {
    /// Suite TOML; replaces --map/--scen/--agents.
    #[arg(long, conflicts_with_all = ["map", "scen", "agents"])]
    suite: Option<PathBuf>,
    #[arg(long)]
    map: Option<PathBuf>,
    /// One or more scene files.
    #[arg(long, num_args = 1..)]
    scen: Vec<PathBuf>,
    /// Comma-separated agent counts; each uses the first n tasks of a scene.
    #[arg(long, value_delimiter = ',')]
    agents: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Planner wall-clock budget per instance in seconds, 0 for none.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    /// Worker threads, defaulting to one per core.
    #[arg(long, env = config::WORKERS_ENV)]
    workers: Option<usize>,
    /// Output directory for solutions and manifest.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ExportArgs {
    /// manifest.tsv written by `collect`.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    radius: usize,
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Suite TOML; replaces --map/--scen/--agents.
    #[arg(long, conflicts_with_all = ["map", "scen", "agents"])]
    suite: Option<PathBuf>,
    #[arg(long)]
    map: Option<PathBuf>,
    /// One or more scene files.
    #[arg(long, num_args = 1..)]
    scen: Vec<PathBuf>,
    /// Comma-separated agent counts; each uses the first n tasks of a scene.
    #[arg(long, value_delimiter = ',')]
    agents: Vec<usize>,
    /// Comma-separated, each `method` or `method/shield`.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Global seed; overrides the suite file's, default 0.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    limits: LimitArgs,
    /// Worker threads, defaulting to one per core.
    #[arg(long, env = config::WORKERS_ENV)]
    workers: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    scen: PathBuf,
    #[arg(long)]
    agents: usize,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    scen: PathBuf,
    #[arg(long)]
    agents: usize,
    /// One line of `(r,c)` cells; defaults to the starts.
    #[arg(long)]
    positions: Option<PathBuf>,
    /// policy:greedy | policy:random | policy:neural
    #[arg(long, default_value = "policy:neural")]
    method: String,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Collect(a) => commands::collect(a),
        Command::ExportDataset(a) => commands::export_dataset(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Validate(a) => commands::validate(a),
        Command::Infer(a) => commands::infer(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
