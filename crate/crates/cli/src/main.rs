mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use foctl::error::{FoctlError, Result};
use serde::Serialize;
use serde_json::{json, Value};

use args::{Cli, Command};
use config::{resolve, Resolved};

fn with_pool<T: Serialize>(run: &Resolved<T>, f: impl FnOnce() -> Result<Value> + Send) -> Result<Value> {
    match run.runtime.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| FoctlError::config("workers", e.to_string()))?
            .install(f),
        None => f(),
    }
}

fn run(cli: &Cli) -> Result<Value> {
    let g = &cli.global;
    let name = cli.command.name();
    match &cli.command {
        Command::Gen(a) => {
            let r = resolve::<_, commands::GenArgs>(name, g, a)?;
            with_pool(&r, || commands::gen(&r))
        }
        Command::Simulate(a) => {
            let r = resolve::<_, commands::SimulateArgs>(name, g, a)?;
            with_pool(&r, || commands::simulate(&r))
        }
        Command::Control(a) => {
            let r = resolve::<_, commands::ControlArgs>(name, g, a)?;
            with_pool(&r, || commands::control(&r))
        }
        Command::Identify(a) => {
            let r = resolve::<_, commands::IdentifyArgs>(name, g, a)?;
            with_pool(&r, || commands::identify(&r))
        }
        Command::Complexity(a) => {
            let r = resolve::<_, commands::ComplexityArgs>(name, g, a)?;
            with_pool(&r, || commands::complexity(&r))
        }
        Command::Baseline(a) => {
            let r = resolve::<_, commands::BaselineArgs>(name, g, a)?;
            with_pool(&r, || commands::baseline_cmd(&r))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            if cli.global.json_errors {
                let mut v = json!({ "error": e.kind(), "message": e.to_string() });
                if let FoctlError::Config { field, .. } = &e {
                    v["field"] = Value::String(field.clone());
                }
                eprintln!("{v}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::FAILURE
        }
    }
}
