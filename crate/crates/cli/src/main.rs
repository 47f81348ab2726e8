//! `yearguessr`: train, run, and score the construction-year estimator.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numeric failure (a
//! non-finite loss or gradient, or a failed gradient check).

mod args;
mod cmd;
mod data;
mod io;

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version land here too; they are not failures
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cmd::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
