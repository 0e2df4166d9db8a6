//! `hypokinetic`: batch runs of the determinant oracle, trajectory construction, finite-difference
//! solves, path simulation and Poincaré ensembles, with CSV/JSON outputs and a run manifest.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "hypokinetic",
    version,
    about = "Hypoelliptic kinetic numerics toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Common {
    /// System spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Root seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Control exponents, one per layer, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare closed-form and numeric Wronskian determinants.
    CheckWronskian {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Build the connecting trajectory between two points.
    Trajectory {
        #[command(flatten)]
        common: Common,
        /// Two lines `x^(κ), …, x^(0), t`: far endpoint, then target.
        #[arg(long)]
        endpoints: PathBuf,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Estimate the Poincaré ratio over a rough-coefficient ensemble.
    Poincare {
        #[command(flatten)]
        common: Common,
        /// Ensemble config JSON.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the finite-difference solver.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Solve config JSON; the reference Gaussian bump when absent.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Simulate paths of the underlying process.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Start point `x^(κ), …, x^(0), t`; the origin when absent.
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        #[arg(long, value_enum, default_value = "trapezoidal")]
        scheme: SchemeArg,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    EulerMaruyama,
    Trapezoidal,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = chrono::Utc::now();
    let result = match cli.command {
        Command::CheckWronskian { common, trials } => commands::check_wronskian(&common, trials),
        Command::Trajectory {
            common,
            endpoints,
            samples,
        } => commands::trajectory(&common, &endpoints, samples),
        Command::Poincare { common, config } => commands::poincare(&common, &config),
        Command::Solve { common, config } => commands::solve(&common, config.as_deref()),
        Command::Simulate {
            common,
            paths,
            horizon,
            dt,
            start,
            scheme,
        } => {
            let scheme = match scheme {
                SchemeArg::EulerMaruyama => hypokinetic::lab::SdeScheme::EulerMaruyama,
                SchemeArg::Trapezoidal => hypokinetic::lab::SdeScheme::Trapezoidal,
            };
            commands::simulate(&common, paths, horizon, dt, start.as_deref(), scheme)
        }
    };
    match result {
        Ok(run) => {
            if let Err(e) = manifest::write(&run, started) {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
            if let Some(msg) = &run.failure {
                eprintln!("error: {msg}");
            }
            ExitCode::from(run.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, hypokinetic::Error::Unsupported(_)) {
                eprintln!(
                    "note: the fractional case beta < 1 is limited to geometry and trajectories"
                );
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
