//! `scenopt`: generate instances, solve them, train the sequence model and
//! evaluate the predict-then-optimize pipeline. Every command is a function of
//! its configuration, input files and seed.

mod commands;
mod config;
mod error;
mod workdir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scenopt::expand::Aggregation;
use scenopt::instances::ProblemKind;
use scenopt::pipeline::PipelineMode;

use config::RunConfig;
use error::CliError;
use workdir::Workdir;

#[derive(Parser)]
#[command(name = "scenopt", version, about = "Learn-to-decide experiments for multi-stage stochastic MIPs")]
struct Cli {
    /// Root that every input and output path is relative to.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Flat JSON file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for generation, training and expansion; falls back to SCENOPT_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-instance parallel work.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// More log output (repeatable); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance family.
    Generate(GenerateArgs),
    /// Solve instances exactly and write the training dataset.
    Solve(SolveArgs),
    /// Train the sequence model on a dataset.
    Train(TrainArgs),
    /// Write per-node decision probabilities.
    Predict(PredictArgs),
    /// Run the predict, screen and solve pipeline against the reference.
    Evaluate(EvaluateArgs),
    /// Summarize a metrics file.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: Option<ProblemKind>,
    /// Number of instances.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Children per node for stages 2..T, e.g. `2,2`.
    #[arg(long, value_delimiter = ',')]
    branching: Option<Vec<usize>>,
    #[arg(long)]
    first_id: Option<u64>,
    /// Also write a CSV table of the uncertain data.
    #[arg(long)]
    csv: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instances: Option<String>,
    /// Seconds per instance.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ExpandArgs {
    /// Extra coverage rounds for item-wise expansion.
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long, value_parser = parse_aggregation)]
    aggregation: Option<Aggregation>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    instances: Option<String>,
    #[command(flatten)]
    expand: ExpandArgs,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    instances: Option<String>,
    /// Archived optima; defaults to optima.jsonl next to the instances.
    #[arg(long)]
    optima: Option<String>,
    #[arg(long)]
    p_fix: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PipelineMode>,
    /// Skip feasibility screening of the fixes.
    #[arg(long)]
    no_screening: bool,
    #[arg(long)]
    unfix_budget: Option<usize>,
    /// Seconds per solver call.
    #[arg(long)]
    time_limit: Option<f64>,
    #[command(flatten)]
    expand: ExpandArgs,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<ProblemKind, String> {
    parse_enum(s)
}

fn parse_mode(s: &str) -> Result<PipelineMode, String> {
    parse_enum(s)
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    parse_enum(s)
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Generate(_) => "generate",
            Self::Solve(_) => "solve",
            Self::Train(_) => "train",
            Self::Predict(_) => "predict",
            Self::Evaluate(_) => "evaluate",
            Self::Report(_) => "report",
        }
    }

    fn flags(&self) -> RunConfig {
        let d = RunConfig::default();
        match self {
            Self::Generate(a) => RunConfig {
                kind: a.kind,
                n: a.n,
                items: a.items,
                horizon: a.horizon,
                branching: a.branching.clone(),
                first_id: a.first_id,
                out: a.out.clone(),
                ..d
            },
            Self::Solve(a) => RunConfig {
                instances: a.instances.clone(),
                time_limit: a.time_limit,
                node_limit: a.node_limit,
                out: a.out.clone(),
                ..d
            },
            Self::Train(a) => RunConfig {
                dataset: a.dataset.clone(),
                epochs: a.epochs,
                hidden: a.hidden,
                learning_rate: a.learning_rate,
                out: a.out.clone(),
                ..d
            },
            Self::Predict(a) => RunConfig {
                model: a.model.clone(),
                instances: a.instances.clone(),
                delta: a.expand.delta,
                aggregation: a.expand.aggregation,
                out: a.out.clone(),
                ..d
            },
            Self::Evaluate(a) => RunConfig {
                model: a.model.clone(),
                instances: a.instances.clone(),
                optima: a.optima.clone(),
                p_fix: a.p_fix,
                mode: a.mode,
                screening: a.no_screening.then_some(false),
                unfix_budget: a.unfix_budget,
                time_limit: a.time_limit,
                delta: a.expand.delta,
                aggregation: a.expand.aggregation,
                out: a.out.clone(),
                ..d
            },
            Self::Report(a) => RunConfig {
                metrics: a.metrics.clone(),
                out: a.out.clone(),
                ..d
            },
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs == 0 {
        return Err(CliError::validation("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| CliError::runtime(e.to_string()))?;

    let file = match &cli.config {
        Some(p) => RunConfig::from_file(&cli.workdir.join(p))?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        seed: cli.seed,
        ..cli.command.flags()
    };
    let cfg = flags.over(file).over(RunConfig::from_env()?);

    let mut ws = Workdir::new(&cli.workdir, cli.command.name())?;
    match &cli.command {
        Command::Generate(a) => commands::generate(&mut ws, &cfg, a.csv)?,
        Command::Solve(_) => commands::solve(&mut ws, &cfg)?,
        Command::Train(_) => commands::train_cmd(&mut ws, &cfg)?,
        Command::Predict(_) => commands::predict_cmd(&mut ws, &cfg)?,
        Command::Evaluate(_) => commands::evaluate(&mut ws, &cfg)?,
        Command::Report(_) => commands::report(&mut ws, &cfg)?,
    }
    ws.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
