use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tdual_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    // panics are reported through the exit status
    std::panic::set_hook(Box::new(|_| {}));
    let outcome = run(&cli);
    if !outcome.output.is_empty() {
        let written = match &cli.out {
            Some(path) => std::fs::write(path, &outcome.output),
            None => std::io::stdout().write_all(outcome.output.as_bytes()),
        };
        if let Err(e) = written {
            eprintln!("tdual: cannot write output: {e}");
            return ExitCode::from(1);
        }
    }
    if let Some(e) = &outcome.error {
        eprintln!("tdual: {e}");
    }
    ExitCode::from(outcome.code as u8)
}
