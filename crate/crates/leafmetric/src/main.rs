use std::process::ExitCode;

use clap::Parser;
use leafmetric::cli::{run, Cli};

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "leafmetric=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    run(Cli::parse())
}
