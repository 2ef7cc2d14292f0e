//! The `careflow` command-line tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod output;
pub mod pca;
pub mod svg;

use std::ffi::OsString;

use clap::Parser;

use cli::{Cli, Command};
use error::CliResult;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 usage or I/O error, 2 numerical failure
/// (including a failed gradient check).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command) -> CliResult<i32> {
    match command {
        Command::GenData(a) => commands::gen_data(a)?,
        Command::Train(a) => commands::train_cmd(a)?,
        Command::Eval(a) => commands::eval_cmd(a)?,
        Command::Ablate(a) => commands::ablate_cmd(a)?,
        Command::Gradcheck(a) => return Ok(if commands::gradcheck_cmd(a)? { 0 } else { 2 }),
        Command::ExportPlot(a) => commands::export_plot_cmd(a)?,
    }
    Ok(0)
}
