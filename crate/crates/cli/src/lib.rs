//! Command-line front end: scenario files in, CSV and JSON out.

pub mod commands;
pub mod error;
pub mod format;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{Mode, StrategySpec};
pub use error::{CliError, Result};
pub use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "ruinvest", version, about = "Optimal investment against ruin: solvers, asymptotics and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form constants and regime classification as JSON.
    Constants {
        scenario: PathBuf,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the value function and write CSV plus a JSON summary.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Asymptotic constants, with tail and value constants fitted from a solve.
    Asymptotes {
        scenario: PathBuf,
        /// Skip the solve and report closed forms only.
        #[arg(long)]
        no_fit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver with the exponential-claim ODE.
    ExpValidate {
        scenario: PathBuf,
        /// Also write the curves and report into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Monte Carlo survival estimate.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        x0: f64,
        /// optimal, zero, const:<a> or file:<path> (two columns x,a on an even grid from 0)
        #[arg(long, default_value = "optimal")]
        strategy: StrategySpec,
        /// Overrides mc.paths.
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Worked example 1: strategies for three claim laws.
    Example1 {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 5e-3)]
        h: f64,
        #[arg(long, default_value_t = 40.0)]
        x_max: f64,
    },
    /// Worked example 2: strategies for three claim laws.
    Example2 {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 5e-3)]
        h: f64,
        #[arg(long, default_value_t = 40.0)]
        x_max: f64,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    use commands::*;
    match cli.command {
        Command::Constants { scenario, out } => emit(&constants(&Scenario::load(&scenario)?)?, out.as_deref()),
        Command::Solve { scenario, mode, out_dir } => {
            let summary = write_solve(&Scenario::load(&scenario)?, mode, &out_dir)?;
            emit(&summary, None)
        }
        Command::Asymptotes { scenario, no_fit, out } => emit(&asymptotes(&Scenario::load(&scenario)?, !no_fit)?, out.as_deref()),
        Command::ExpValidate { scenario, out_dir } => {
            emit(&write_exp_validate(&Scenario::load(&scenario)?, out_dir.as_deref())?, None)
        }
        Command::Simulate { scenario, x0, strategy, paths, out } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(n) = paths {
                s.mc.n_paths = n;
            }
            emit(&simulate(&s, x0, &strategy)?, out.as_deref())
        }
        Command::Example1 { out_dir, h, x_max } => emit(&write_example(&example(1), h, x_max, &out_dir)?, None),
        Command::Example2 { out_dir, h, x_max } => emit(&write_example(&example(2), h, x_max, &out_dir)?, None),
    }
}
