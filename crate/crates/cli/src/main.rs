mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use srm_core::mec::Mode;
use srm_core::SrmError;

#[derive(Parser, Debug, Serialize)]
#[command(name = "srm-forge", version, about = "Static and dynamic simulation of two-phase C-core reluctance motors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Torque-angle curves and commutation angles.
    Characterize(CharacterizeArgs),
    /// Fixed-speed drive simulation with trace and metrics output.
    Simulate(SimulateArgs),
    /// Closed-form equivalence, magnet dominance and net-work checks.
    Verify(VerifyArgs),
    /// Simulate several motors and tabulate them against a baseline.
    Compare(CompareArgs),
    /// Recompute metrics from an existing trace CSV.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MotorArgs {
    /// Motor spec JSON file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Built-in preset, e.g. table1-motor4.
    #[arg(long, conflicts_with = "spec")]
    pub preset: Option<String>,
    /// Comma-separated topologies, e.g. 1,2,3,4 or motor2,motor4.
    #[arg(long, value_delimiter = ',')]
    pub motors: Vec<String>,
    #[arg(long, default_value = "saturable", value_parser = parse_mode)]
    pub mode: Mode,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    pub plots: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CharacterizeArgs {
    #[command(flatten)]
    pub motor: MotorArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    pub currents: Vec<f64>,
    /// Angle step of the curves, mech deg.
    #[arg(long, default_value_t = 0.1)]
    pub grid_step: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DriveArgs {
    #[arg(long, default_value_t = 600.0)]
    pub speed_rpm: f64,
    /// Simulated time, s. Defaults to eight electrical periods.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub dt: f64,
    #[arg(long, default_value_t = 6.0)]
    pub i_ref: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 150.0)]
    pub v_dc: f64,
    #[arg(long, default_value = "hard", value_parser = ["hard", "soft"])]
    pub chopping: String,
    /// Use the half-pitch window instead of the extracted angles.
    #[arg(long)]
    pub conventional: bool,
    /// Steady cycles used for metrics; defaults to all complete cycles after settling.
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Angle step of the flux-linkage and torque tables, mech deg.
    #[arg(long, default_value_t = 0.1)]
    pub map_step: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub motor: MotorArgs,
    #[command(flatten)]
    pub drive: DriveArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub motor: MotorArgs,
    /// Currents of the net-work check.
    #[arg(long, value_delimiter = ',', default_value = "6")]
    pub currents: Vec<f64>,
    /// Rotor positions per pitch in the closed-form sweep.
    #[arg(long, default_value_t = 40)]
    pub positions: usize,
    #[arg(long, default_value_t = 0.1)]
    pub grid_step: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub motor: MotorArgs,
    #[command(flatten)]
    pub drive: DriveArgs,
    /// Currents of the static mean/peak table.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    pub currents: Vec<f64>,
    /// Label of the reference motor, e.g. motor1. Defaults to the first.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub grid_step: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub motor: MotorArgs,
    /// Trace CSV written by `simulate`.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub cycles: Option<usize>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: SrmError| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core { context: String, source: SrmError },
    Io { path: PathBuf, source: std::io::Error },
    Verification(String),
}

impl CliError {
    pub fn core(context: impl Into<String>) -> impl FnOnce(SrmError) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Core { source, .. } => match source {
                SrmError::Parse(_)
                | SrmError::InvalidSpec { .. }
                | SrmError::UnknownPreset(_)
                | SrmError::UnknownMaterial(_)
                | SrmError::InconsistentRadialDimensions(_)
                | SrmError::InvalidPhase(_)
                | SrmError::InvalidArgument(_)
                | SrmError::TooFewEntries(_)
                | SrmError::TraceTooShort { .. }
                | SrmError::Io(_) => 1,
                _ => 2,
            },
            CliError::Verification(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core { context, source } => write!(f, "{context}: {source}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SRM_FORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SRM_FORGE_THREADS must be a positive integer, got {v:?}")))?;
    // a second initialisation in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Characterize(a) => commands::characterize(a, &argv),
        Command::Simulate(a) => commands::simulate(a, &argv),
        Command::Verify(a) => commands::verify(a, &argv),
        Command::Compare(a) => commands::compare(a, &argv),
        Command::Metrics(a) => commands::metrics(a, &argv),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("srm-forge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
