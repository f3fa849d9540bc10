//! Command-line front end: `train`, `eval`, `ablate` and `synth`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => commands::train::run(&a).map(drop),
        Command::Eval(a) => commands::eval::run(&a).map(drop),
        Command::Ablate(a) => commands::ablate::run(&a).map(drop),
        Command::Synth(a) => commands::synth::run(&a).map(drop),
    }
}
