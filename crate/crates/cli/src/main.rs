//! `dphase`: batch runs of the forward, DN-map and reconstruction solvers.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use commands::{error_payload, Failure};
use config::{resolve, Command, Overrides, RunConfig};
use output::Artifacts;

const EXIT_SOLVER: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "dphase", version, about = "Double phase forward solves, DN data and coefficient reconstruction")]
struct Cli {
    /// Overrides `command` from the config file.
    #[arg(value_enum)]
    command: Option<Command>,

    /// TOML config with sections mesh, problem, coefficient, data, schedule, recon, run.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,

    #[command(flatten)]
    overrides: Overrides,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::from_file(path) {
            Ok(c) => c,
            Err(msg) => {
                // Still honour a flag or env output dir for the manifest.
                let mut fallback = RunConfig::default();
                fallback.apply(cli.overrides);
                return config_error(&fallback, json!({ "module_error": "config", "message": msg }));
            }
        },
        None => RunConfig::default(),
    };
    cfg.apply(cli.overrides);
    if cli.command.is_some() {
        cfg.command = cli.command;
    }
    if cli.print_config {
        print!("{}", toml::to_string(&cfg).expect("config serializes"));
        return ExitCode::SUCCESS;
    }

    let resolved = match resolve(&cfg) {
        Ok(r) => r,
        Err(e) => return config_error(&cfg, error_payload(&e)),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.run.workers).build() {
        Ok(p) => p,
        Err(e) => return config_error(&cfg, json!({ "module_error": "config", "message": e.to_string() })),
    };
    let dir = cfg.out_dir();
    let mut out = match Artifacts::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let result = pool.install(|| commands::run(&resolved, &mut out));
    let (status, error, code) = match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ("ok", None, ExitCode::SUCCESS)
        }
        Err(Failure::Solver(e)) => ("solver_failure", Some(error_payload(&e)), ExitCode::from(EXIT_SOLVER)),
        Err(Failure::Check(msg)) => {
            ("check_failure", Some(json!({ "module_error": "check", "message": msg })), ExitCode::from(EXIT_SOLVER))
        }
        Err(Failure::Io(e)) => {
            ("io_failure", Some(json!({ "module_error": "io", "message": e.to_string() })), ExitCode::from(EXIT_SOLVER))
        }
    };
    if let Some(err) = &error {
        eprintln!("error: {}", err["message"].as_str().unwrap_or("unknown"));
    }
    if let Err(e) = out.finish(&cfg, status, error) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(EXIT_SOLVER);
    }
    code
}

fn config_error(cfg: &RunConfig, payload: Value) -> ExitCode {
    eprintln!("config error: {}", payload["message"].as_str().unwrap_or("unknown"));
    if let Ok(out) = Artifacts::create(&cfg.out_dir()) {
        let _ = out.finish(cfg, "config_error", Some(payload));
    }
    ExitCode::from(EXIT_CONFIG)
}
