//! `bandsphere` command-line front end.
//!
//! Exit codes: 0 when every check of the run passes, 1 for numerical or
//! acceptance failures, 2 for usage and configuration errors.

mod commands;
mod config_file;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

pub const SEED_ENV: &str = "BANDSPHERE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "bandsphere",
    version,
    about = "Band-limited Gaussian random fields on the sphere: covariance tables, simulation and Monte Carlo experiments"
)]
pub struct Cli {
    /// Flat TOML file of `flag = value` pairs; flags on the command line take precedence
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Covariance profile: exact, Christoffel-Darboux, Hilb and rescaled-angle approximations
    #[command(args_override_self = true)]
    Covariance(CovarianceArgs),
    /// Synthesize one field and dump its grid values
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Excursion-area mean and second-chaos variance per n
    #[command(args_override_self = true)]
    Excursion(ExperimentArgs),
    /// Log-log fit of the excursion-area variance against n
    #[command(args_override_self = true)]
    Scaling(ExperimentArgs),
    /// Kolmogorov-Smirnov normality test of the standardized excursion area
    #[command(args_override_self = true)]
    Clt(ExperimentArgs),
    /// Variances of the chaos projections h_2, h_3, h_4 across n
    #[command(args_override_self = true)]
    Chaos(ExperimentArgs),
}

pub const SUBCOMMANDS: [&str; 6] = ["covariance", "simulate", "excursion", "scaling", "clt", "chaos"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rounding {
    Ceil,
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    FieldFull,
    H2Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Band {
    /// ℓ from ⌈αn⌉ to n
    Limited,
    /// ℓ = n only
    Single,
    /// ℓ from 0 to n
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DumpFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Output file; standard output when absent
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CovarianceArgs {
    /// Top frequency
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Band exponent, 0 < beta < 1
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// First rescaled angle psi = theta·alpha·n
    #[arg(long, default_value_t = 0.0)]
    pub psi_min: f64,
    /// Last rescaled angle [default: alpha·n·(pi − epsilon)]
    #[arg(long)]
    pub psi_max: Option<f64>,
    /// Number of equally spaced angles
    #[arg(long, default_value_t = 500)]
    pub points: usize,
    /// Distance kept from the antipode
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Rounding::Ceil)]
    pub rounding: Rounding,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Master seed
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    pub seed: u64,
    /// Replicate index; selects the random stream
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    /// Grid degree as a multiple of n
    #[arg(long, default_value_t = 4.0)]
    pub oversample: f64,
    #[arg(long, value_enum, default_value_t = Rounding::Ceil)]
    pub rounding: Rounding,
    #[arg(long, value_enum, default_value_t = Band::Limited)]
    pub band: Band,
    #[arg(long, value_enum, default_value_t = DumpFormat::Csv)]
    pub format: DumpFormat,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Top frequencies, comma separated and strictly increasing
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "64,128,256")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Excursion threshold
    #[arg(long, default_value_t = 1.0)]
    pub u: f64,
    /// Replicates per n [default: 2000 in field-full mode, 100000 in h2-direct mode]
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Master seed
    #[arg(long, env = SEED_ENV, default_value_t = 42)]
    pub seed: u64,
    /// Grid degree as a multiple of n (never below 2n)
    #[arg(long, default_value_t = 4.0)]
    pub oversample: f64,
    #[arg(long, value_enum, default_value_t = Mode::FieldFull)]
    pub mode: Mode,
    /// Highest chaos order projected
    #[arg(long, default_value_t = 4)]
    pub q_max: usize,
    #[arg(long, value_enum, default_value_t = Rounding::Ceil)]
    pub rounding: Rounding,
    #[arg(long, value_enum, default_value_t = Band::Limited)]
    pub band: Band,
    /// Bootstrap resamples for standard errors
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Worker threads; 0 uses every core. Results do not depend on it
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// json: full report; csv: per-replicate functionals
    #[arg(long, value_enum, default_value_t = TableFormat::Json)]
    pub format: TableFormat,
    #[command(flatten)]
    pub output: Output,
}

fn parse_args() -> Result<Cli, ExitCode> {
    let mut args: Vec<OsString> = std::env::args_os().collect();
    if let Some(path) = config_file::find_config_path(&args) {
        match config_file::config_args(PathBuf::from(&path).as_path()) {
            Ok(extra) => args = config_file::splice_after_subcommand(args, extra, &SUBCOMMANDS),
            Err(e) => {
                eprintln!("error: {e}");
                return Err(ExitCode::from(2));
            }
        }
    }
    Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { 2 } else { 0 };
        let _ = e.print();
        ExitCode::from(code)
    })
}

fn main() -> ExitCode {
    let cli = match parse_args() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
