//! Command-line surface for the `gammamix` library: argument and config
//! handling, file formats, run manifests and the experiment drivers.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

use clap::Parser;

pub use args::{Cli, Command};
pub use commands::execute;
pub use error::{CliError, CliResult};

/// Parses `argv` (config file entries included) into a [`Cli`].
pub fn parse_args(argv: Vec<String>) -> Result<Cli, ParseFailure> {
    let argv = config::expand_config(argv, args::SUBCOMMANDS).map_err(ParseFailure::Config)?;
    Cli::try_parse_from(argv).map_err(ParseFailure::Clap)
}

#[derive(Debug)]
pub enum ParseFailure {
    Config(CliError),
    Clap(clap::Error),
}
