use std::process::ExitCode;

use clap::Parser;
use rescaled_cli::args::Args;
use rescaled_cli::run::{run, EXIT_ERROR};

fn main() -> ExitCode {
    // Usage errors exit with 3 like every other failure; 2 means max_iters.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let config = match args.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    let outcome = run(&config);
    if outcome.exit_code == EXIT_ERROR {
        eprint!("{}", outcome.summary);
    } else {
        print!("{}", outcome.summary);
    }
    ExitCode::from(outcome.exit_code as u8)
}
