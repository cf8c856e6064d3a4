//! `levelhold`: command-line frontend for closed-loop setpoint control of
//! a scalar growth quantity and for the discrete maps the controllers
//! induce. One invocation runs one computation and emits CSV or JSON for
//! external plotting.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O
//! error.

mod commands;
mod errors;
mod render;
mod resolve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "levelhold",
    version,
    about = "Sampled-feedback setpoint control of a growing quantity, and the \
             closed-loop maps it induces: simulation, stability analysis, \
             cascade scans, orbits, attractor bounds, convergence studies",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Flat JSON config file whose keys are the long flag names without
    /// the leading dashes; command-line flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file path (standard output when omitted)
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Output format: csv or json [default: csv]
    #[arg(long, global = true, value_name = "FORMAT")]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run a closed control loop and emit its trajectory
    #[command(allow_negative_numbers = true)]
    Simulate(commands::SimulateArgs),
    /// Fixed point, eigenvalues and critical step of a closed-loop map
    #[command(allow_negative_numbers = true)]
    Stability(commands::StabilityArgs),
    /// Sweep a map parameter: long-run samples, periods, Lyapunov
    /// exponents, refined period doublings, chaos onset
    #[command(allow_negative_numbers = true)]
    Scan(commands::ScanArgs),
    /// Iterate one map at fixed parameters and record the orbit
    #[command(allow_negative_numbers = true)]
    Orbit(commands::OrbitArgs),
    /// Attractor bounding rectangle of the two-phase map, optionally
    /// with points of its invariant curve
    #[command(allow_negative_numbers = true)]
    Bounds(commands::BoundsArgs),
    /// Steady-state error of a controller across a list of sampling
    /// steps
    #[command(allow_negative_numbers = true)]
    Converge(commands::ConvergeArgs),
}

fn main() -> ExitCode {
    // bare invocation is a usage error, not a help request
    if std::env::args_os().len() <= 1 {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        eprintln!("{}", cmd.render_help());
        return ExitCode::from(2);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
