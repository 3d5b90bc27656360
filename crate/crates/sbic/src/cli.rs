//! The `sbic` command-line front end.
//!
//! Subcommands: `solve` scores a model-collection JSON file; `rrr`,
//! `mixture`, and `factor` run the family pipelines (fit a profile, score
//! it, report the selection); `experiment` runs the Monte Carlo
//! rank-selection study. Every command takes `--seed` and prints the
//! resolved seed to standard error, so runs are reproducible even when the
//! seed was drawn at startup.
//!
//! Exit codes: 0 success, 2 schema errors (malformed files or flag
//! combinations; the message names the offending key), 3 validation errors
//! (inputs that parse but violate a contract), 4 numeric failures, 1 other
//! I/O errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use sbic_core::solver::{solve, SolveError};

use crate::experiment::{emit_results, run_rrr_experiment, ExperimentConfig, ExperimentError};
use crate::factor::{
    fa_sbic_input, fit_factor_profile, sample_covariance, FactorError, DEFAULT_UNIQUENESS_FLOOR,
};
use crate::fileio::{
    build_input, read_covariance, read_model_collection, read_observation_matrix, read_rrr_pair,
    read_rrr_single, read_scalar_series, selected_labels, solve_table, write_table_csv,
    write_table_json, FileError, SelectionSummary, SolveRow,
};
use crate::mixture::{
    default_variance_floor, fit_mixture_profile, galaxies_dataset, mixture_sbic_input, MixtureError,
};
use crate::rrr::{
    fit_profile, rrr_sbic_input, simulate_coefficient_matrix, simulate_data, RrrError,
};
use crate::seed::stream_rng;

pub const EXIT_IO: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Schema(String),
    Validation(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Schema(m) => write!(f, "schema error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        match e {
            FileError::Schema(m) => CliError::Schema(m),
            FileError::Validation(m) => CliError::Validation(m),
            FileError::Io { .. } => CliError::Io(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::NonFinite { .. } | SolveError::NonConvergence { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<RrrError> for CliError {
    fn from(e: RrrError) -> Self {
        match e {
            RrrError::SingularDesign { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MixtureError> for CliError {
    fn from(e: MixtureError) -> Self {
        match e {
            MixtureError::DegenerateComponent { .. } | MixtureError::AllRestartsFailed { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FactorError> for CliError {
    fn from(e: FactorError) -> Self {
        match e {
            FactorError::Degenerate | FactorError::AllRestartsFailed { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config { .. } => CliError::Validation(e.to_string()),
            ExperimentError::EmptyCounts => CliError::Numeric(e.to_string()),
            ExperimentError::Rrr(inner) => inner.into(),
            ExperimentError::Solve(inner) => inner.into(),
            ExperimentError::Io(m) => CliError::Io(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sbic",
    version,
    about = "Model selection with BIC and the singular BIC over model posets"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score the models described in a model-collection JSON file
    Solve(SolveArgs),
    /// Reduced-rank regression: fit all ranks and select one
    Rrr(RrrArgs),
    /// Univariate Gaussian mixtures: fit component counts and select one
    Mixture(MixtureArgs),
    /// Factor analysis on six variables: fit factor counts and select one
    Factor(FactorArgs),
    /// Monte Carlo rank-selection study with CSV output
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (standard output when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Model-collection JSON file
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
    /// Unused by this subcommand, accepted for interface uniformity
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RrrArgs {
    /// CSV of responses, rows = observations (with --y2)
    #[arg(long, requires = "y2")]
    y1: Option<PathBuf>,
    /// CSV of covariates, rows = observations (with --y1)
    #[arg(long, requires = "y1")]
    y2: Option<PathBuf>,
    /// Single CSV with y1_/y2_ column prefixes
    #[arg(long, conflicts_with_all = ["y1", "y2", "simulate"])]
    data: Option<PathBuf>,
    /// Simulate data instead of reading it
    #[arg(long, conflicts_with_all = ["y1", "y2"])]
    simulate: bool,
    /// Response dimension N (simulation)
    #[arg(long)]
    n_dim: Option<usize>,
    /// Covariate dimension M (simulation)
    #[arg(long)]
    m_dim: Option<usize>,
    /// Comma-separated nonzero singular values of the true matrix (simulation)
    #[arg(long, value_delimiter = ',')]
    singular_values: Option<Vec<f64>>,
    /// Number of observations (simulation)
    #[arg(long)]
    samples: Option<usize>,
    /// Largest rank to fit (default min(N, M))
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct MixtureArgs {
    /// Data file: single-column CSV or whitespace-separated reals
    #[arg(long, conflicts_with = "galaxies")]
    data: Option<PathBuf>,
    /// Use the bundled galaxy-velocity data (units of 1000 km/s)
    #[arg(long)]
    galaxies: bool,
    #[arg(long, default_value_t = 10)]
    max_components: usize,
    /// EM restarts per component count
    #[arg(long, default_value_t = 500)]
    restarts: usize,
    /// Absolute variance floor (default 1e-4 × sample variance)
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct FactorArgs {
    /// CSV of raw observations, rows = cases, 6 columns
    #[arg(long, conflicts_with_all = ["cov", "n"])]
    data: Option<PathBuf>,
    /// Precomputed 6×6 covariance CSV (requires --n)
    #[arg(long, requires = "n")]
    cov: Option<PathBuf>,
    /// Sample size behind --cov
    #[arg(long)]
    n: Option<u64>,
    /// Largest factor count (at most 3)
    #[arg(long, default_value_t = 3)]
    max_factors: usize,
    /// EM restarts per factor count
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    /// Relative uniqueness floor (× diag(S))
    #[arg(long, default_value_t = DEFAULT_UNIQUENESS_FLOOR)]
    floor: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON configuration (keys n_dim, m_dim, singular_values,
    /// sample_sizes, replicates, max_rank, seed); --seed still overrides
    #[arg(
        long,
        conflicts_with_all = ["n_dim", "m_dim", "singular_values", "sample_sizes", "replicates", "max_rank"]
    )]
    config: Option<PathBuf>,
    #[arg(long)]
    n_dim: Option<usize>,
    #[arg(long)]
    m_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    singular_values: Option<Vec<f64>>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "100,150,200,250,300,400,500"
    )]
    sample_sizes: Vec<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Selection-frequency CSV path
    #[arg(long, default_value = "frequencies.csv")]
    out: PathBuf,
    /// Entropy-summary CSV path
    #[arg(long, default_value = "entropy.csv")]
    entropy_out: PathBuf,
}

/// Parses arguments from the environment and runs; returns the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    configure_threads();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Rrr(args) => cmd_rrr(args),
        Command::Mixture(args) => cmd_mixture(args),
        Command::Factor(args) => cmd_factor(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Ok(value) = std::env::var("SBIC_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    let resolved = seed.unwrap_or_else(|| rand::rng().random());
    eprintln!("seed: {resolved}");
    resolved
}

fn emit_table(
    rows: &[SolveRow],
    n: u64,
    selected: Option<&SelectionSummary>,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let mut buffer = Vec::new();
    let write_result = match out.format {
        Format::Csv => write_table_csv(rows, selected, &mut buffer),
        Format::Json => write_table_json(rows, n, selected, &mut buffer),
    };
    write_result.map_err(|e| CliError::Io(e.to_string()))?;
    match &out.output {
        Some(path) => {
            std::fs::write(path, &buffer).map_err(|e| write_error(path, e))?;
        }
        None => {
            std::io::stdout()
                .write_all(&buffer)
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn write_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("cannot write {}: {e}", path.display()))
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    resolve_seed(args.seed);
    let file = read_model_collection(&args.input)?;
    let (input, labels) = build_input(&file)?;
    let result = solve(&input)?;
    let rows = solve_table(&labels, &input, &result);
    emit_table(&rows, input.n, None, &args.out)
}

fn cmd_rrr(args: RrrArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let data = if args.simulate {
        let n_dim = args
            .n_dim
            .ok_or_else(|| CliError::Schema("--simulate requires --n-dim".into()))?;
        let m_dim = args
            .m_dim
            .ok_or_else(|| CliError::Schema("--simulate requires --m-dim".into()))?;
        let samples = args
            .samples
            .ok_or_else(|| CliError::Schema("--simulate requires --samples".into()))?;
        let singular_values = args
            .singular_values
            .clone()
            .ok_or_else(|| CliError::Schema("--simulate requires --singular-values".into()))?;
        let mut rng = stream_rng(seed, 0, 0);
        let pi = simulate_coefficient_matrix(n_dim, m_dim, &singular_values, &mut rng)?;
        simulate_data(&pi, samples, &mut rng)
    } else if let Some(path) = &args.data {
        read_rrr_single(path)?
    } else if let (Some(y1), Some(y2)) = (&args.y1, &args.y2) {
        read_rrr_pair(y1, y2)?
    } else {
        return Err(CliError::Schema(
            "no data source: use --simulate, --data, or --y1/--y2".into(),
        ));
    };
    let max_rank = args
        .max_rank
        .unwrap_or_else(|| data.response_dim().min(data.covariate_dim()));
    let profile = fit_profile(&data, max_rank)?;
    let input = rrr_sbic_input(&profile)?;
    let result = solve(&input)?;
    let labels: Vec<String> = (0..=max_rank).map(|r| r.to_string()).collect();
    let rows = solve_table(&labels, &input, &result);
    let selected = selected_labels(&labels, &result);
    emit_table(&rows, input.n, Some(&selected), &args.out)
}

fn cmd_mixture(args: MixtureArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let data = if args.galaxies {
        galaxies_dataset()
    } else if let Some(path) = &args.data {
        read_scalar_series(path)?
    } else {
        return Err(CliError::Schema(
            "no data source: use --data or --galaxies".into(),
        ));
    };
    let floor = match args.floor {
        Some(floor) if floor > 0.0 && floor.is_finite() => floor,
        Some(_) => {
            return Err(CliError::Validation(
                "--floor must be positive and finite".into(),
            ))
        }
        None => default_variance_floor(&data),
    };
    let profile = fit_mixture_profile(&data, args.max_components, args.restarts, floor, seed)?;
    for components in profile.monotonicity_violations() {
        eprintln!(
            "warning: best log-likelihood at {components} components fell below {} components (local optima)",
            components - 1
        );
    }
    let input = mixture_sbic_input(&profile)?;
    let result = solve(&input)?;
    let labels: Vec<String> = (1..=args.max_components).map(|c| c.to_string()).collect();
    let rows = solve_table(&labels, &input, &result);
    let selected = selected_labels(&labels, &result);
    emit_table(&rows, input.n, Some(&selected), &args.out)
}

fn cmd_factor(args: FactorArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    if args.max_factors > 3 {
        return Err(CliError::Validation(
            "--max-factors is limited to 3 (the coefficient table ends there)".into(),
        ));
    }
    let (s, n) = if let Some(path) = &args.data {
        let observations = read_observation_matrix(path)?;
        let (s, cases) = sample_covariance(&observations);
        (s, cases as u64)
    } else if let Some(path) = &args.cov {
        let n = args
            .n
            .ok_or_else(|| CliError::Schema("--cov requires --n".into()))?;
        (read_covariance(path)?, n)
    } else {
        return Err(CliError::Schema(
            "no data source: use --data or --cov with --n".into(),
        ));
    };
    if s.nrows() != 6 {
        return Err(CliError::Validation(format!(
            "the factor pipeline covers exactly 6 variables, got {}",
            s.nrows()
        )));
    }
    let profile = fit_factor_profile(&s, n, args.max_factors, args.floor, args.restarts, seed)?;
    for factors in profile.monotonicity_violations() {
        eprintln!(
            "warning: best log-likelihood at {factors} factors fell below {} factors (local optima)",
            factors - 1
        );
    }
    let input = fa_sbic_input(&profile)?;
    let result = solve(&input)?;
    let labels: Vec<String> = (0..=args.max_factors).map(|f| f.to_string()).collect();
    let rows = solve_table(&labels, &input, &result);
    let selected = selected_labels(&labels, &result);
    emit_table(&rows, input.n, Some(&selected), &args.out)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CliError::Schema(e.to_string()))?
        }
        None => {
            let required = |name: &str| CliError::Schema(format!("missing --{name} (or --config)"));
            ExperimentConfig {
                n_dim: args.n_dim.ok_or_else(|| required("n-dim"))?,
                m_dim: args.m_dim.ok_or_else(|| required("m-dim"))?,
                singular_values: args
                    .singular_values
                    .clone()
                    .ok_or_else(|| required("singular-values"))?,
                sample_sizes: args.sample_sizes.clone(),
                replicates: args.replicates.ok_or_else(|| required("replicates"))?,
                max_rank: args.max_rank.ok_or_else(|| required("max-rank"))?,
                seed: 0,
            }
        }
    };
    if args.seed.is_some() || args.config.is_none() {
        config.seed = resolve_seed(args.seed);
    } else {
        eprintln!("seed: {}", config.seed);
    }
    let frequencies = run_rrr_experiment(&config)?;
    emit_results(&frequencies, &args.out, &args.entropy_out)?;
    eprintln!(
        "wrote {} and {}",
        args.out.display(),
        args.entropy_out.display()
    );
    Ok(())
}
