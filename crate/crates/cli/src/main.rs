mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// How a command failed.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag value; names the flag.
    Usage { flag: &'static str, message: String },
    /// The command ran but the outcome is negative (diverged, target missed).
    Domain(String),
    /// Anything else, such as I/O.
    Failed(String),
}

impl CliError {
    pub fn usage(flag: &'static str, message: impl ToString) -> Self {
        CliError::Usage {
            flag,
            message: message.to_string(),
        }
    }

    pub fn failed(e: impl ToString) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    eprintln!(
        "resolved config: {}",
        serde_json::to_string(&cli).unwrap_or_else(|e| format!("<{e}>"))
    );
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage { flag, message }) => {
            eprintln!("error: invalid value for --{flag}: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(message)) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
        Err(CliError::Failed(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
