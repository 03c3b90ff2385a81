//! Command-line front end: fit structured Gaussian conditional models from
//! CSV data, simulate synthetic populations, verify structural recovery,
//! run identifiability diagnostics, and score or inspect saved models.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Error carrying the process exit code: 1 input, 2 infeasibility, 3
/// non-convergence.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn nonconvergence(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl From<sdrgm::Error> for CliError {
    fn from(e: sdrgm::Error) -> Self {
        match e {
            sdrgm::Error::InvalidArgument(m) => CliError::input(m),
            sdrgm::Error::NumericalFailure(m)
            | sdrgm::Error::ConstructionFailure(m)
            | sdrgm::Error::DegenerateModel(m) => CliError::infeasible(m),
        }
    }
}

#[derive(Parser)]
#[command(name = "sdrgm", version, about = "Structured Gaussian conditional model estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FitArgs {
    /// Variant: sdr-fm | sdr-gm | sdr-lvgm | cs-lvgm | cs-gm.
    #[arg(long)]
    model: String,
    /// Headered numeric CSV.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated response column names, or @FILE (one per line).
    #[arg(long)]
    responses: String,
    /// Comma-separated covariate column names, or @FILE (one per line).
    #[arg(long)]
    covariates: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Leave the diagonal of S_Y out of the l1 penalty.
    #[arg(long)]
    no_diag_penalty: bool,
    /// Z-score every column with training statistics (stored in the model).
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    /// Rank of the cross block.
    #[arg(long = "rank-k")]
    rank_k: usize,
    /// Latent count (rank of the low-rank conditional part).
    #[arg(long = "latent-h")]
    latent_h: usize,
    /// Per-row cap on off-diagonal nonzeros of the sparse conditional part.
    #[arg(long)]
    degree: usize,
    /// Restrict the cross block to this many nonzero columns.
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Use the calibrated benchmark magnitudes (p=20, q=4 scale).
    #[arg(long)]
    benchmark: bool,
    #[arg(long = "out-pop")]
    out_pop: PathBuf,
    #[arg(long = "out-data")]
    out_data: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Population JSON written by `simulate`.
    #[arg(long)]
    pop: PathBuf,
    /// Comma-separated ascending sample sizes.
    #[arg(long = "n-grid")]
    n_grid: String,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "sdr-lvgm")]
    variant: String,
    #[arg(long = "lambda-scale", default_value_t = sdrgm::harness::LAMBDA_SCALE_DEFAULT)]
    lambda_scale: f64,
    #[arg(long, default_value_t = sdrgm::harness::GAMMA_DEFAULT)]
    gamma: f64,
    #[arg(long, default_value_t = sdrgm::harness::DELTA_DEFAULT)]
    delta: f64,
    /// Per-trial CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON summary output path.
    #[arg(long = "out-json")]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    pop: PathBuf,
    /// Fisher-information minimum gain α.
    #[arg(long)]
    alpha: f64,
    /// Conditioning ratio parameter ν ∈ (0, 1/3).
    #[arg(long)]
    nu: f64,
    #[arg(long = "omega-y")]
    omega_y: f64,
    #[arg(long = "omega-yx")]
    omega_yx: f64,
    /// Probe count for the sampled Φ-geometry estimates.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20000)]
    n: usize,
    #[arg(long, default_value_t = sdrgm::harness::GAMMA_DEFAULT)]
    gamma: f64,
    #[arg(long, default_value_t = sdrgm::harness::DELTA_DEFAULT)]
    delta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    model: PathBuf,
    /// Second model: adds principal angles between the projection maps and
    /// edge-set overlap.
    #[arg(long)]
    compare: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to CSV data and save it as JSON.
    Fit(FitArgs),
    /// Generate a synthetic population and draw samples from it.
    Simulate(SimulateArgs),
    /// Monte Carlo structural-recovery experiment over a sample-size grid.
    Verify(VerifyArgs),
    /// Identifiability and recovery-condition diagnostics for a population.
    Diagnose(DiagnoseArgs),
    /// Average conditional log-likelihood of a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Inspect a saved model: edges, ranks, parameter count, comparisons.
    Report(ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::cmd_fit(&args),
        Command::Simulate(args) => commands::cmd_simulate(&args),
        Command::Verify(args) => commands::cmd_verify(&args),
        Command::Diagnose(args) => commands::cmd_diagnose(&args),
        Command::Evaluate(args) => commands::cmd_evaluate(&args),
        Command::Report(args) => commands::cmd_report(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
