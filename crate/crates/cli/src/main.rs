use std::process::ExitCode;

use clap::Parser;
use symheat_cli::{run, RunRequest};

fn main() -> ExitCode {
    let request = RunRequest::parse();
    match run(request) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
