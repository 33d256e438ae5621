//! `cara`: generate synthetic rotation-averaging scenes, solve graph files,
//! evaluate estimates and run benchmark grids.
//!
//! Exit codes: 0 success, 2 I/O or parse failure, 3 unsolvable input,
//! 64 usage error.

mod args;
mod bench;
mod commands;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{BenchArgs, Cli, Command};
use crate::error::{CliError, CliResult};

fn cmd_bench(args: &BenchArgs) -> CliResult {
    let rows = bench::run_suite(args.suite, &args.seeds.0)?;
    let csv = bench::to_csv(&rows);
    match &args.out {
        Some(path) => commands::write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    eprint!("{}", bench::summary(&rows));
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Generate(a) => commands::cmd_generate(a),
        Command::Solve(a) => commands::cmd_solve(a),
        Command::Eval(a) => commands::cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run with --help for usage");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
