//! `cand`: genetic-algorithm candidate model search, simulation and
//! multi-model inference from the command line.
//!
//! Exit codes: 0 on success, 2 on configuration or input errors, 3 on
//! numerical failures.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cand", version, about = "GA candidate model search and multi-model inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the GA on a CSV dataset (last column is the response).
    Search(SearchArgs),
    /// Run seeded simulation replicates and write CSV/JSON reports.
    Simulate(SimulateArgs),
    /// Trace schema counts through a GA run.
    SchemaTrace(SchemaTraceArgs),
    /// Build the exact Markov chain of a tiny GA and report xi and T_alpha.
    MarkovVerify(MarkovArgs),
    /// Survival model set of a candidate file.
    Sms(SmsArgs),
    /// Model-averaging weights and in-sample fit of a candidate file.
    Average(AverageArgs),
    /// Per-variable SOIL importance of a candidate file.
    Soil(AverageArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MutationArg {
    Uniform,
    Adaptive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AssocArg {
    Cor,
    Holp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Lasso,
    Explicit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightArg {
    Gic,
    Al,
}

/// GA flags; any flag given overrides the config file.
#[derive(Args, Debug, Default)]
struct GaArgs {
    /// Population size K (0 = automatic).
    #[arg(long)]
    pop_size: Option<usize>,
    /// Mutation rate pi_m (default 1/d).
    #[arg(long)]
    mutation_rate: Option<f64>,
    #[arg(long, value_enum)]
    mutation: Option<MutationArg>,
    #[arg(long, value_enum)]
    assoc: Option<AssocArg>,
    #[arg(long)]
    term_alpha: Option<f64>,
    #[arg(long)]
    term_gap: Option<usize>,
    #[arg(long)]
    max_gen: Option<usize>,
    /// Stop when equal mean fitness is rejected.
    #[arg(long)]
    terminate_on_reject: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Explicit initial masks, one 0/1 string per line.
    #[arg(long)]
    init_file: Option<PathBuf>,
    #[arg(long)]
    lambda_grid_size: Option<usize>,
    /// GIC penalty kappa_n (default 3.5 log d).
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file, n rows and d + 1 columns, response last.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    no_header: bool,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON config with GA keys (population_size, mutation_kind, ...).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    ga: GaArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the distinct final-population masks here.
    #[arg(long)]
    candidates_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<u8>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    ga: GaArgs,
    #[arg(long)]
    sms_alpha: Option<f64>,
    #[arg(long)]
    no_sms: bool,
    #[arg(long)]
    no_al: bool,
    /// Leave wall time out of the reports.
    #[arg(long)]
    no_timing: bool,
    /// Output directory for results.csv, soil.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SchemaTraceArgs {
    /// Schema file, one pattern over {0, 1, *} per line.
    #[arg(long)]
    schemata: PathBuf,
    /// Dataset CSV; if absent a simulation case is generated.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    no_header: bool,
    #[arg(long, default_value_t = 1)]
    case: u8,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 400)]
    d: usize,
    #[arg(long, default_value_t = 6)]
    s: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Seed of the simulated dataset.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    ga: GaArgs,
    /// CSV output (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MarkovArgs {
    #[arg(long)]
    d: usize,
    #[arg(long = "K", alias = "k")]
    k: usize,
    #[arg(long)]
    pi_m: f64,
    /// File with 2^d fitness values (whitespace or comma separated), indexed
    /// by mask code with bit j for variable j.
    #[arg(long)]
    fitness_table: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CandidateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate masks, one 0/1 string per line.
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    kappa: Option<f64>,
    /// JSON report path (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV table path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SmsArgs {
    #[command(flatten)]
    cand: CandidateArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct AverageArgs {
    #[command(flatten)]
    cand: CandidateArgs,
    #[arg(long, value_enum, default_value_t = WeightArg::Gic)]
    weights: WeightArg,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Search(a) => commands::search(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::SchemaTrace(a) => commands::schema_trace(a),
        Command::MarkovVerify(a) => commands::markov_verify(a),
        Command::Sms(a) => commands::sms(a),
        Command::Average(a) => commands::average(a),
        Command::Soil(a) => commands::soil(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
