use std::process::ExitCode;

use clap::Parser;

use quasilocal_cli::config::{Cli, Command};

fn main() -> ExitCode {
    let (cmd, opts) = Cli::parse().command.split();
    match quasilocal_cli::run(cmd, &opts) {
        Ok(outcome) => {
            for (stage, status) in &outcome.cache {
                eprintln!("cache {stage}: {status:?}");
            }
            match cmd {
                Command::Report => print!("{}", outcome.report.render()),
                Command::Mass => {
                    for key in ["mass.P", "mass.P_class", "mass.monotone", "mass.limit_constant"] {
                        if let Some(v) = outcome.report.get(key) {
                            println!("{key} = {v}");
                        }
                    }
                }
                _ => {
                    for f in &outcome.files {
                        println!("{}", f.display());
                    }
                }
            }
            for f in &outcome.failures {
                eprintln!("verify failed: {f}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
