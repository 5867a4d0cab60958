use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use semiso_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let command = cli.command.name();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string(&outcome.summary).expect("summary serializes"));
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                let report = json!({
                    "status": "failed",
                    "command": command,
                    "failures": outcome.failures,
                });
                eprintln!("{report}");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let report = json!({
                "status": "error",
                "command": command,
                "error": format!("{e:#}"),
            });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
