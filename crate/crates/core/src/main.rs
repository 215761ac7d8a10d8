use std::process::ExitCode;

use clap::Parser;
use crlab::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("crlab: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
