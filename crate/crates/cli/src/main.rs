use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use conereach_cli::commands::{Command, EXIT_ERROR};
use conereach_cli::scenario::Overrides;
use conereach_cli::{combine_exit_codes, run_file};

#[derive(Parser, Debug)]
#[command(
    name = "conereach",
    version,
    about = "Reachability under conic control constraints via the dual functional"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Override the scenario's number of grid intervals.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Override the scenario's target radius.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Override the solver seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and control CSVs.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Number of scenarios processed concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Minimize the dual functional, rebuild the control and verify it.
    Solve { scenarios: Vec<PathBuf> },
    /// Kalman rank, strong Kalman condition and subcone rank families.
    Check { scenarios: Vec<PathBuf> },
    /// Estimate the exact-reachability constant c*.
    Cstar {
        /// Also minimize J at eps = 0 and compare with −c*²/4.
        #[arg(long)]
        with_solve: bool,
        scenarios: Vec<PathBuf>,
    },
    /// Compare the dual pipeline with the direct primal solver.
    OracleCompare { scenarios: Vec<PathBuf> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, paths) = match cli.command {
        Cmd::Solve { scenarios } => (Command::Solve, scenarios),
        Cmd::Check { scenarios } => (Command::Check, scenarios),
        Cmd::Cstar { with_solve, scenarios } => (Command::Cstar { with_solve }, scenarios),
        Cmd::OracleCompare { scenarios } => (Command::OracleCompare, scenarios),
    };
    if paths.is_empty() {
        eprintln!("error: no scenario files given");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    let overrides = Overrides {
        grid: cli.grid,
        eps: cli.eps,
        seed: cli.seed,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    let results: Vec<_> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| (p, run_file(cmd, p, overrides, &cli.out)))
            .collect()
    });
    let mut codes = Vec::new();
    for (path, res) in results {
        match res {
            Ok((outcome, _)) => {
                println!("{}", outcome.summary);
                codes.push(outcome.exit_code);
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", path.display());
                codes.push(EXIT_ERROR);
            }
        }
    }
    ExitCode::from(combine_exit_codes(&codes) as u8)
}
