use std::process::ExitCode;

use capnet_cli::{exit_code, run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    exit_code(run(cli, &mut stdout.lock()))
}
