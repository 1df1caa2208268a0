//! `phylodrift`: simulations, persistence estimates, moment tables and sweeps.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage or domain error,
//! 3 a run hit a cap, 4 an internal invariant failed.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use phylodrift::Error;

use commands::Cli;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Explosion { .. }) => 3,
        Some(Error::Invariant(_)) => 4,
        Some(Error::Argument(_) | Error::Domain(_)) => 2,
        Some(Error::InvalidCall(_) | Error::Numerical(_)) => 4,
        _ if err.downcast_ref::<commands::UsageError>().is_some() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli, std::env::args().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
