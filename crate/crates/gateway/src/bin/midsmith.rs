use std::io::{self, BufReader};
use std::process::ExitCode;

use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("MIDSMITH_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    let stdin = io::stdin();
    let code = midsmith_gateway::cli::run(
        std::env::args_os(),
        &mut io::stdout(),
        &mut io::stderr(),
        &mut BufReader::new(stdin.lock()),
    );
    ExitCode::from(code as u8)
}
