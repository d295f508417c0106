use std::process::ExitCode;

use clap::Parser;
use softsnap_cli::cli::{run, Cli};
use softsnap_core::Error;

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_target(false).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            match err.downcast_ref::<Error>() {
                Some(core) => eprintln!("error [{}]: {err:#}", core.code()),
                None => eprintln!("error: {err:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
