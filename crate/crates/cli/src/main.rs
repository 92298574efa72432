mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use boostpm::Error;
use clap::{Args, Parser, Subcommand};

/// Thread count override; unset means all cores.
const THREADS_ENV: &str = "BOOSTPM_THREADS";

#[derive(Parser)]
#[command(name = "boostpm", version, about = "Density estimation by unsupervised tree boosting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a numeric CSV file.
    Train(TrainArgs),
    /// Write the log-density of every row of a CSV file.
    Density(DensityArgs),
    /// Draw samples from a model.
    Sample(SampleArgs),
    /// Report per-dimension variable importance.
    Importance(ImportanceArgs),
    /// Choose c0 and gamma by k-fold cross-validation.
    Cv(CvArgs),
    /// Generate a synthetic data set with its true log-densities.
    Simulate(SimulateArgs),
    /// Estimate KL divergence from a synthetic scenario to a model.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Trees per dimension in the marginal stage.
    #[arg(long, default_value_t = 100)]
    trees_margin: usize,
    /// Unrestricted trees in the second stage.
    #[arg(long, default_value_t = 2500)]
    trees_copula: usize,
    #[arg(long, default_value_t = 50)]
    max_depth: usize,
    /// Candidate cut points per dimension plus one.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    /// Nodes with fewer points are not split.
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit unrestricted trees only.
    #[arg(long)]
    no_two_stage: bool,
    /// Break tied values with uniform noise before scaling.
    #[arg(long)]
    jitter_ties: bool,
    /// Relative padding of the min-max box.
    #[arg(long, default_value_t = 0.01)]
    margin: f64,
    /// Use the data as given; every value must lie in (0, 1].
    #[arg(long)]
    no_scale: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    c0: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Treat the data as raw values and include the scaling Jacobian.
    #[arg(long)]
    original_scale: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Map draws back to the training data's scale.
    #[arg(long)]
    original_scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated c0 values.
    #[arg(long, default_value = "0.1,0.2,0.3")]
    c0_grid: String,
    /// Comma-separated gamma values.
    #[arg(long, default_value = "0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    gamma_grid: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Multiplies both stage tree counts for the fold models.
    #[arg(long, default_value_t = 1.0)]
    schedule_scale: f64,
    /// Score table output file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// A, B or C.
    #[arg(long)]
    scenario: String,
    /// Sample size; the scenario's default when absent.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// True log-densities output; defaults to `<out stem>.truth.csv`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    scenario: String,
    /// Monte-Carlo sample size.
    #[arg(long, default_value_t = 100_000)]
    mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid usage")
                .trim_start_matches("error: ");
            eprintln!("error: kind=usage msg={first}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = configure_threads() {
        return report(e);
    }
    let outcome = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Density(a) => commands::density(a),
        Command::Sample(a) => commands::sample(a),
        Command::Importance(a) => commands::importance(a),
        Command::Cv(a) => commands::cv(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn configure_threads() -> boostpm::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn report(e: Error) -> ExitCode {
    let (kind, code, msg) = match e {
        Error::InvalidArgument(m) => ("usage", 2, m),
        Error::Data(m) => ("data", 3, m),
        Error::Io(io) => ("io", 3, io.to_string()),
        Error::Model(m) => ("model", 4, m),
    };
    eprintln!("error: kind={kind} msg={}", msg.replace('\n', " "));
    ExitCode::from(code)
}
