//! `besq`: command-line harness over the core library. Exit codes:
//! 0 success, 2 usage error, 3 nonconvergence, 4 internal error.

mod cli;
mod commands;
mod config;
mod manifest;

use clap::Parser;
use std::process::ExitCode;

use cli::{Cli, Command, Globals};
use config::FileConfig;

/// CLI-level error: a message plus the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 2 }
    }
    pub fn nonconvergence(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 3 }
    }
    pub fn internal(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 4 }
    }
}

impl From<besq_core::Error> for CliError {
    fn from(e: besq_core::Error) -> Self {
        use besq_core::Error as E;
        match &e {
            E::InvalidParam { .. } | E::Parse(_) | E::GridMismatch(_) => {
                CliError::usage(e.to_string())
            }
            E::NonConvergence { .. } | E::Refinement { .. } => {
                CliError::nonconvergence(e.to_string())
            }
            E::Io(_) => CliError::internal(e.to_string()),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::usage("threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path, cli.command.allowed_keys())?,
        None => FileConfig::empty(),
    };
    let g = Globals { seed: cli.seed, out: cli.out.clone() };
    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(a, &cfg, &g),
        Command::SolveOde(a) => commands::cmd_solve_ode(a, &cfg, &g),
        Command::Rate(a) => commands::cmd_rate(a, &cfg, &g),
        Command::SupJ(a) => commands::cmd_sup_j(a, &cfg, &g),
        Command::Geodesic(a) => commands::cmd_geodesic(a, &cfg, &g),
        Command::BallProb(a) => commands::cmd_ball_prob(a, &cfg, &g),
        Command::LdpSlope(a) => commands::cmd_ldp_slope(a, &cfg, &g),
        Command::Clt(a) => commands::cmd_clt(a, &cfg, &g),
        Command::Converge(a) => commands::cmd_converge(a, &cfg, &g),
        Command::Bounds(a) => commands::cmd_bounds(a, &cfg, &g),
        Command::Tails(a) => commands::cmd_tails(a, &cfg, &g),
        Command::Supermg(a) => commands::cmd_supermg(a, &cfg, &g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
