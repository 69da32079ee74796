//! Command-line scenario runner.
//!
//! One subcommand per scenario; each loads a configuration file, runs the
//! scenario, and writes CSV/JSON artifacts plus `summary.json` to the output
//! directory.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure,
//! 3 consistency checks failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qring::error::Error;
use qring::scenario::{self, OutputFormat, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "qring",
    about = "Simulates entangled microwave-beam generation by a transmon ring \
             and checks the dynamics against closed-form oracles",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the configured output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the configured output format
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Static plasmon/photon mode spectrum
    Spectrum(RunArgs),
    /// Full-system decay into the photon band vs the continuum decay law
    ContinuumDecay(RunArgs),
    /// Reduced two-mode run vs the closed-form squeezing solution
    TwoMode(RunArgs),
    /// Detuning sweep of photon-number oscillation periods vs the Rabi formula
    RabiSweep(RunArgs),
    /// Analytic squeezing surface r*(t, delta)
    Fig3Surface(RunArgs),
    /// Gaussian EPR variance vs the truncated-Fock oracle
    EprReport(RunArgs),
}

impl Command {
    fn kind(&self) -> ScenarioKind {
        match self {
            Command::Spectrum(_) => ScenarioKind::Spectrum,
            Command::ContinuumDecay(_) => ScenarioKind::ContinuumDecay,
            Command::TwoMode(_) => ScenarioKind::TwoMode,
            Command::RabiSweep(_) => ScenarioKind::RabiSweep,
            Command::Fig3Surface(_) => ScenarioKind::Fig3Surface,
            Command::EprReport(_) => ScenarioKind::EprReport,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Spectrum(a)
            | Command::ContinuumDecay(a)
            | Command::TwoMode(a)
            | Command::RabiSweep(a)
            | Command::Fig3Surface(a)
            | Command::EprReport(a) => a,
        }
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_CHECKS: u8 = 3;

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter { .. }
        | Error::ModeIndexOutOfRange { .. }
        | Error::GridMismatch(_)
        | Error::Io(_) => EXIT_USAGE,
        Error::OutOfBand { .. }
        | Error::NumericDomain { .. }
        | Error::IntegrationFailure { .. }
        | Error::QuadratureNonConvergence { .. }
        | Error::FaintDrive { .. }
        | Error::InsufficientTruncation { .. }
        | Error::UndefinedRatio => EXIT_NUMERIC,
    }
}

fn run(command: &Command) -> Result<u8, (u8, String)> {
    let run_args = command.args();
    let text = std::fs::read_to_string(&run_args.config).map_err(|e| {
        (
            EXIT_USAGE,
            format!("cannot read {}: {e}", run_args.config.display()),
        )
    })?;
    let mut config =
        scenario::parse_config(&text).map_err(|e| (exit_code_for(&e), e.to_string()))?;
    if config.scenario != command.kind() {
        return Err((
            EXIT_USAGE,
            format!(
                "config declares scenario '{}' but the '{}' subcommand was invoked",
                config.scenario.as_str(),
                command.kind().as_str()
            ),
        ));
    }
    if let Some(out) = &run_args.out {
        config.output.dir = out.clone();
    }
    if let Some(format) = run_args.format {
        config.output.format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }

    let summary = scenario::run_scenario(&config).map_err(|e| {
        (
            exit_code_for(&e),
            format!("scenario '{}' failed: {e}", config.scenario.as_str()),
        )
    })?;
    for check in &summary.checks {
        eprintln!(
            "check {}: {} (value {:.3e}, tolerance {:.3e})",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.value,
            check.tolerance
        );
    }
    println!(
        "{}: wrote {} file(s) to {}",
        config.scenario.as_str(),
        summary.files.len() + 1,
        config.output.dir.display()
    );
    Ok(if summary.all_passed { 0 } else { EXIT_CHECKS })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, everything else is usage
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
