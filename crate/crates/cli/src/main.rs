use std::process::ExitCode;

use clap::Parser;
use qcd_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QCD_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qcd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
