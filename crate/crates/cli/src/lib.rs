//! Front end for the `lora-capacity` binary.
//!
//! Every command writes CSV (or a plain-text table) to stdout or `--out`.
//! CSV output starts with a `#schema=1` comment line and has a fixed column
//! order, so identical inputs give identical bytes.

mod analytic_cmds;
mod output;
mod sim_cmds;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use output::{resolve_config, CONFIG_DIR_ENV, SCHEMA_LINE};

#[derive(Debug, Parser)]
#[command(name = "lora-capacity", version, about = "LoRaWAN capacity analysis and simulation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file. Relative paths that do not exist are looked up in
    /// `$LORA_CAPACITY_CONFIG_DIR`.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Cell preset (`paper-urban`, `single-ring`) when no config is given.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Number of seeds (1..=K); overrides the scenario's seed list.
    #[arg(long, global = true, value_name = "K")]
    pub seeds: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time on air for every SF and payload.
    Toa(ToaArgs),
    /// SF probabilities of the configured cell.
    SfDist(SfDistArgs),
    /// Network throughput when every device sends at its duty-cycle cap.
    Fig2(Fig2Args),
    /// Per-node throughput against the generation rate.
    Fig3(Fig3Args),
    /// Maximum per-node throughput and the rate that achieves it.
    Table1(Table1Args),
    /// Run the simulator on a scenario file.
    Simulate(SimulateArgs),
    /// Run the simulator over a range of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ToaArgs {
    #[arg(long, default_value_t = 125_000)]
    pub bandwidth_hz: u32,
    /// Denominator of the coding rate 4/x.
    #[arg(long, default_value_t = 5)]
    pub coding_rate: u8,
    #[arg(long, default_value_t = 8)]
    pub preamble: u16,
}

#[derive(Debug, Clone, Args)]
pub struct SfDistArgs {
    /// Also sample this many device positions and report SF frequencies.
    #[arg(long, value_name = "N")]
    pub empirical: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct Fig2Args {
    #[arg(long, default_value_t = 10)]
    pub payload: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_devices: u32,
    /// Grid density in points per decade of N.
    #[arg(long, default_value_t = 40)]
    pub points_per_decade: u32,
}

#[derive(Debug, Clone, Args)]
pub struct SimColumns {
    /// Append simulated throughput over K seeds with a 95% half-width.
    #[arg(long, value_name = "K")]
    pub simulate: Option<u64>,
    /// Simulated time per seed.
    #[arg(long, default_value_t = 7200.0)]
    pub sim_duration_s: f64,
}

#[derive(Debug, Clone, Args)]
pub struct Fig3Args {
    #[arg(long, value_delimiter = ',', default_values_t = [250u32, 500, 1000, 5000])]
    pub devices: Vec<u32>,
    #[arg(long, default_value_t = 10)]
    pub payload: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 1e5)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 20)]
    pub points_per_decade: u32,
    #[command(flatten)]
    pub sim: SimColumns,
}

#[derive(Debug, Clone, Args)]
pub struct Table1Args {
    #[arg(long, value_delimiter = ',', default_values_t = [250u32, 500, 1000, 5000])]
    pub devices: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 30, 50])]
    pub payloads: Vec<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[command(flatten)]
    pub sim: SimColumns,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario file (same as `--config`).
    pub scenario: Option<PathBuf>,
    /// Write the event trace here.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Check the trace against the duty-cycle limits and fail if violated.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Lambda,
    Devices,
    AckFraction,
    Payload,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
}

/// Failure classes, mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad scenario, preset or flag combination.
    Config(String),
    /// Failure while computing or writing results.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }

    pub(crate) fn config(e: impl fmt::Display) -> Self {
        Self::Config(e.to_string())
    }

    pub(crate) fn runtime(e: impl fmt::Display) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    let c = &cli.common;
    let (text, default_path) = match &cli.command {
        Command::Toa(a) => (analytic_cmds::toa(a)?, None),
        Command::SfDist(a) => (analytic_cmds::sf_dist(c, a)?, None),
        Command::Fig2(a) => (analytic_cmds::fig2(c, a)?, None),
        Command::Fig3(a) => (analytic_cmds::fig3(c, a)?, None),
        Command::Table1(a) => (analytic_cmds::table1(c, a)?, None),
        Command::Simulate(a) => sim_cmds::simulate(c, a)?,
        Command::Sweep(a) => (sim_cmds::sweep(c, a)?, None),
    };
    output::emit(c.out.as_deref().or(default_path.as_deref()), &text)
}
