//! `lithos`: plant simulation, observer runs, twin experiments and identification
//! from the command line.
//!
//! Every run writes its resolved configuration and a flat `key = value` summary into
//! its output directory and prints the summary on stdout. Logs go to stderr.
//! Exit status: 0 on success, 1 when the run itself fails, 2 on a usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lithos::harness::PlantHealth;
use lithos::Execution;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Run(#[from] lithos::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "lithos",
    version,
    about = "Lithium-ion cell simulation, state estimation and identification"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Run independent jobs on the calling thread instead of the worker pool.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("{}: no such file", p.display()))
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output directory; LITHOS_OUT_DIR overrides the default.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Drive cycle CSV (t_s,current_A,temperature_K).
    #[arg(long, value_parser = existing_file)]
    pub cycle: PathBuf,
    /// Twin configuration TOML; the reference setup when absent.
    #[arg(long, value_parser = existing_file)]
    pub config: Option<PathBuf>,
    /// `fresh` or `aged:<Ah>`.
    #[arg(long)]
    pub plant: Option<PlantHealth>,
    /// Initial state of charge.
    #[arg(long)]
    pub soc: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ObserveArgs {
    /// Measured cycle CSV with a voltage_V column.
    #[arg(long, value_parser = existing_file)]
    pub cycle: PathBuf,
    /// Twin configuration TOML supplying cell parameters and observer gains.
    #[arg(long, value_parser = existing_file)]
    pub config: Option<PathBuf>,
    /// Observer starting SOC.
    #[arg(long, default_value_t = 0.3)]
    pub soc0: f64,
    /// Observer starting capacity (Ah); the configured initial guess when absent.
    #[arg(long)]
    pub capacity: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TwinArgs {
    /// Drive cycle CSV.
    #[arg(long, value_parser = existing_file)]
    pub cycle: PathBuf,
    #[arg(long, value_parser = existing_file)]
    pub config: Option<PathBuf>,
    /// `fresh` or `aged:<Ah>`.
    #[arg(long)]
    pub plant: Option<PlantHealth>,
    /// Plant starting SOC.
    #[arg(long)]
    pub soc: Option<f64>,
    /// Current noise standard deviation (A).
    #[arg(long)]
    pub noise_current: Option<f64>,
    /// Voltage noise standard deviation (V).
    #[arg(long)]
    pub noise_voltage: Option<f64>,
    /// Constant current offset (A).
    #[arg(long)]
    pub bias_current: Option<f64>,
    /// Constant voltage offset (V).
    #[arg(long)]
    pub bias_voltage: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Cycle CSV; the 1C reference discharge when absent.
    #[arg(long, value_parser = existing_file)]
    pub cycle: Option<PathBuf>,
    /// Cell parameter TOML; the reference cell when absent.
    #[arg(long, value_parser = existing_file)]
    pub params: Option<PathBuf>,
    /// Sample spacing of the generated 1C profile (s).
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Starting SOC of the simulations.
    #[arg(long, default_value_t = 1.0)]
    pub soc0: f64,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Comma separated parameters; all 18 when absent.
    #[arg(long)]
    pub free: Option<String>,
    /// Relative perturbation.
    #[arg(long, default_value_t = 1e-3)]
    pub rel_step: f64,
    /// Forward instead of central differences.
    #[arg(long)]
    pub forward: bool,
    /// Minimum column norm for the subset.
    #[arg(long, default_value_t = 0.2)]
    pub sens_threshold: f64,
    /// Maximum |correlation| inside the subset.
    #[arg(long, default_value_t = 0.8)]
    pub corr_threshold: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Parameters to fit; selected by sensitivity analysis when absent.
    #[arg(long)]
    pub free: Option<String>,
    /// Capacity used to Coulomb count measured data (Ah); the cell's when absent.
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Relative offset applied to the free parameters before fitting (kept in bounds).
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,
    /// Cost evaluations allowed.
    #[arg(long, default_value_t = lithos::ident::DEFAULT_BUDGET)]
    pub budget: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ValidateGainsArgs {
    #[arg(long, value_parser = existing_file)]
    pub config: Option<PathBuf>,
    /// Assumed initial SOC error for the conservative bounds.
    #[arg(long)]
    pub initial_error: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the plant over a drive cycle.
    Simulate(SimulateArgs),
    /// Run the observer over measured current and voltage.
    Observe(ObserveArgs),
    /// Plant, sensor corruption and observer in one run.
    Twin(TwinArgs),
    /// Fit cell parameters to a voltage trace.
    Identify(IdentifyArgs),
    /// Sensitivity ranking, correlation and identifiable subset.
    Sensitivity(SensitivityArgs),
    /// Check observer gains against the stability conditions.
    ValidateGains(ValidateGainsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let r = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Observe(a) => commands::observe(a),
        Command::Twin(a) => commands::twin(a),
        Command::Identify(a) => commands::identify(a, exec),
        Command::Sensitivity(a) => commands::sensitivity(a, exec),
        Command::ValidateGains(a) => commands::validate_gains(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
