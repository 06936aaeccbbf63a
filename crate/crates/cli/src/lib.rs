//! Command-line runner: configuration, input validation, and one entry point
//! per experiment.

pub mod commands;
pub mod config;
mod error;

pub use commands::{execute, sha256_hex, OUTPUT_ROOT_ENV};
pub use config::{parse_args, usage, Command, RunConfig, KEYS};
pub use error::{CliError, CliResult};

/// Parses `args` (without the program name), runs the command and returns
/// the process exit code.
pub fn run<S: AsRef<str>>(args: &[S]) -> i32 {
    if args.is_empty() || matches!(args[0].as_ref(), "help" | "--help" | "-h") {
        print!("{}", usage());
        return if args.is_empty() { 2 } else { 0 };
    }
    let result = parse_args(args).and_then(|(cmd, cfg)| execute(cmd, &cfg));
    match result {
        Ok(out) => {
            println!("{}", out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
