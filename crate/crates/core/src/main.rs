use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    aesa_core::cli::run(aesa_core::cli::Cli::parse())
}
