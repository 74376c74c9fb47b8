use std::process::ExitCode;

use clap::Parser;
use fragline_cli::{run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    ExitCode::from(run(&args))
}
