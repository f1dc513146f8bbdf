//! Command-line front end: flag and config parsing, commands and report
//! output.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use clap::Parser;
use config::{Cli, CliCommand, CommandName, RunConfig};
use error::CliResult;
use std::ffi::OsString;

pub use error::CliError;
pub use report::{Report, Table};

/// Resolves the effective configuration for a parsed command line.
pub fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    match &cli.command {
        CliCommand::Green(o) => RunConfig::from_opts(Some(CommandName::Green), None, o),
        CliCommand::Sample { target, opts } => {
            RunConfig::from_opts(Some(CommandName::Sample), Some(*target), opts)
        }
        CliCommand::Ylaw(o) => RunConfig::from_opts(Some(CommandName::Ylaw), None, o),
        CliCommand::Limits(o) => RunConfig::from_opts(Some(CommandName::Limits), None, o),
        CliCommand::Run { config, opts } => {
            let mut o = opts.clone();
            o.config = Some(config.clone());
            RunConfig::from_opts(None, None, &o)
        }
    }
}

/// Runs a configuration and writes its output.
pub fn execute(cfg: &RunConfig) -> CliResult<Report> {
    if let Some(t) = cfg.threads {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global();
    }
    let report = commands::run(cfg)?;
    report.emit()?;
    Ok(report)
}

/// Entry point returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match resolve(&cli).and_then(|cfg| execute(&cfg)) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
