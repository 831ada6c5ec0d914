use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dimerbath_cli::{parse_config, run, Status};

/// Run a dimerbath configuration and report the verification outcome.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Configuration file.
    config: PathBuf,
    /// Worker threads; 1 gives bit-reproducible output.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

fn exit(status: Status, reason: impl std::fmt::Display) -> ExitCode {
    eprintln!("{reason}");
    ExitCode::from(status.code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        dimerbath::set_threads(n as usize);
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return exit(Status::ConfigError, format_args!("config-error: {}: {e}", args.config.display())),
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return exit(Status::ConfigError, format_args!("config-error: {e}")),
    };
    match run(&config) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            exit(outcome.status(), outcome.reason())
        }
        Err(e) => exit(e.status(), e),
    }
}
