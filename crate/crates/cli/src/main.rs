//! `sps` command-line front-end. Failures print `error: <CODE>: <message>`
//! on standard error and exit nonzero.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command, Output};

/// Exit status for solver errors; usage errors exit with 2.
const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn fail(code: &str, message: impl std::fmt::Display, status: u8) -> ExitCode {
    let msg = message.to_string();
    let line = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
    eprintln!("error: {code}: {line}");
    ExitCode::from(status)
}

fn emit(output: &Output, text: &str) -> std::io::Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("E_USAGE", e, EXIT_USAGE),
    };
    let (result, output) = match &cli.command {
        Command::Solve(a) => (commands::solve(a), &a.output),
        Command::Compare(a) => (commands::compare(a), &a.output),
        Command::Coeffs(a) => (commands::coeffs(a), &a.output),
        Command::Bounds(a) => (commands::bounds(a), &a.output),
        Command::Reduce(a) => (commands::reduce(a), &a.output),
        Command::Logistic(a) => (commands::logistic(a), &a.output),
    };
    match result {
        Ok(r) => match emit(output, &r.text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail("E_IO", e, EXIT_FAILURE),
        },
        Err(e) => fail(e.code(), e, EXIT_FAILURE),
    }
}
