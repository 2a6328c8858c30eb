//! `esc-energy` command line: parse arguments, load the TOML config, run one
//! model command and emit its report.
//!
//! Reports go to stdout as JSON. With `--out report.json` the JSON document
//! is written there, next to `report.fields.csv` and one
//! `report.<table>.csv` per table.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use esc_energy::report::Report;

mod commands;
pub mod config;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(#[from] clap::Error),
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] esc_energy::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => 0,
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "esc-energy",
    version,
    about = "Energy model for RF-powered devices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the JSON report here, plus CSV files alongside.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit V_OC and R to `[inputs] trace`.
    FitCharge(Common),
    /// Sample the charging curve over `[predict] horizon_s`.
    PredictCharge(Common),
    /// Harvester open-circuit voltage at `[ocv] p_dbm`.
    Ocv(Common),
    /// Fit the current/transmit-power sigmoid to `[inputs] calibration`.
    FitPower(Common),
    /// Timing and energy of the single `[packet]`.
    PacketCost(Common),
    /// Energy ledger of the burst in `[inputs] plan`.
    SimulateBurst(Common),
    /// Packets per active cycle and recharge time.
    PlanCycle(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::FitCharge(c)
            | Command::PredictCharge(c)
            | Command::Ocv(c)
            | Command::FitPower(c)
            | Command::PacketCost(c)
            | Command::SimulateBurst(c)
            | Command::PlanCycle(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub report: Report,
    /// Non-fatal conditions such as a brown-out.
    pub warnings: Vec<String>,
    pub out: Option<PathBuf>,
}

/// Runs one command. `args` includes the program name.
pub fn run<I, T>(args: I) -> Result<Output, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let common = cli.command.common();
    let config = RunConfig::load(&common.config)?;
    let (report, warnings) = match &cli.command {
        Command::FitCharge(_) => (commands::fit_charge(&config)?, Vec::new()),
        Command::PredictCharge(_) => (commands::predict_charge(&config)?, Vec::new()),
        Command::Ocv(_) => (commands::ocv(&config)?, Vec::new()),
        Command::FitPower(_) => (commands::fit_power(&config)?, Vec::new()),
        Command::PacketCost(_) => (commands::packet_cost(&config)?, Vec::new()),
        Command::SimulateBurst(_) => commands::simulate_burst(&config)?,
        Command::PlanCycle(_) => commands::plan_cycle(&config)?,
    };
    Ok(Output {
        report,
        warnings,
        out: common.out.clone(),
    })
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the report to `--out` (JSON plus CSV) or to `stdout` (JSON).
pub fn emit(output: &Output, stdout: &mut impl Write) -> Result<(), CliError> {
    let json = output.report.to_json();
    match &output.out {
        Some(path) => {
            write_file(path, &json)?;
            write_file(&sibling(path, "fields"), &output.report.fields_csv())?;
            for table in &output.report.tables {
                write_file(&sibling(path, &table.name), &table.to_csv())?;
            }
            Ok(())
        }
        None => stdout
            .write_all(json.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}
