use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match smlc::cli::run(smlc::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
