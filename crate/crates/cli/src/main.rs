//! `ksat`: command-line front end for the k-SAT counting toolkit.
//!
//! Every structured output embeds the configuration that produced it, and
//! no output depends on the number of worker threads.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use ksat_core::Error;

use args::Cli;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InstanceTooLarge { .. } => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
