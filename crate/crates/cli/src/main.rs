use std::io;
use std::process::ExitCode;

use clap::Parser;
use gl2census::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut out, mut err) = (io::stdout().lock(), io::stderr());
    match run(&cli, &mut out, &mut err) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gl2census: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
