use std::process::ExitCode;

use clap::Parser;
use gdyn::cli::Cli;
use gdyn::commands;
use gdyn::error::EXIT_OK;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command, std::env::args().collect()) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
