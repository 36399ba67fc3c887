//! The `co2watch` command line.

pub mod args;
pub mod config;
mod commands;

use std::ffi::OsString;
use std::io::Write;

use clap::{CommandFactory, Parser};
use co2watch_core::{Error, ErrorClass};

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REJECT: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

/// Failure of a command, rendered as `error: CODE: detail`.
#[derive(Debug)]
pub struct Failure {
    pub code: String,
    pub detail: String,
    pub exit: i32,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = match e.class() {
            ErrorClass::Numerical => EXIT_NUMERICAL,
            ErrorClass::Validation | ErrorClass::Io => EXIT_DATA,
        };
        Failure {
            code: e.code().to_string(),
            detail: e.to_string(),
            exit,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

pub(crate) fn usage(code: &str, detail: impl Into<String>) -> Failure {
    Failure {
        code: code.to_string(),
        detail: detail.into(),
        exit: EXIT_USAGE,
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::expand_config(&Cli::command(), argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: ConfigFile: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match commands::dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}: {}", f.code, f.detail);
            f.exit
        }
    }
}
