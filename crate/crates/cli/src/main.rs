mod args;
mod commands;
mod config;
mod failure;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::failure::{Failure, Outcome};

fn run(cli: Cli) -> Outcome {
    let quiet = cli.quiet;
    let job = move || match cli.command {
        Command::Replay(a) => commands::replay(&a, quiet),
        command => {
            let profile = config::resolve_profile(cli.config.as_deref(), &cli.profile)?;
            commands::execute(profile, command, quiet)
        }
    };
    match cli.threads {
        Some(0) => Err(Failure::validation("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::validation(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
