use std::process::ExitCode;

use clap::Parser;
use twoway::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match twoway::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("twoway: verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("twoway: {e:#}");
            ExitCode::from(2)
        }
    }
}
