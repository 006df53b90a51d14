use std::process::ExitCode;

use cbm_core::cli::{run, Cli};
use cbm_core::Error;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            match serde_json::to_string_pretty(&outcome.summary) {
                Ok(s) => println!("{s}"),
                Err(e) => eprintln!("cbm: {e}"),
            }
            for path in &outcome.artifacts {
                eprintln!("wrote {}", path.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("cbm: {e}");
            match e {
                Error::InvalidParameter { .. } | Error::Json(_) | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
