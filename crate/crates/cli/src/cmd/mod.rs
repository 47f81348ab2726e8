//! Subcommand implementations.

mod eval;
mod gradcheck;
mod ingest;
mod predict;
mod report;
mod split;
mod train;

use crate::args::{Cli, Command};
use yearguessr_core::Result;

/// Dispatch. The returned value is the process exit code, so a command can
/// report a failed check without it being an error.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Ingest(a) => ingest::run(&a).map(|()| 0),
        Command::Split(a) => split::run(&a).map(|()| 0),
        Command::Train(a) => train::run(&a).map(|()| 0),
        Command::Predict(a) => predict::run(&a).map(|()| 0),
        Command::Eval(a) => eval::run(&a).map(|()| 0),
        Command::Gradcheck(a) => gradcheck::run(&a),
        Command::Report(a) => report::run(&a).map(|()| 0),
    }
}
