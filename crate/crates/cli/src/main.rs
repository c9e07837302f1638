use std::process::ExitCode;

use bscx::{execute, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bscx: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
