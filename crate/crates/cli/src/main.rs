use std::process::ExitCode;

use clap::Parser;
use fairmeasure_cli::{run, Cli, RunConfig, EXIT_SPEC_ERROR};

fn main() -> ExitCode {
    let result = RunConfig::from_cli(Cli::parse()).and_then(|config| run(&config));
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{f}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SPEC_ERROR as u8)
        }
    }
}
