use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use semilab::cli::{parse_config, run, EXIT_ERROR};

/// Runs a property scenario and writes CSV reports.
#[derive(Debug, Parser)]
#[command(name = "semilab", version)]
struct Args {
    /// Line-oriented `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name; overrides the configuration file.
    #[arg(long)]
    scenario: Option<String>,
    /// Random seed; overrides the configuration file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_ERROR as u8);
            }
        },
        None => String::new(),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    if let Some(s) = &args.scenario {
        if let Err(e) = cfg.set_scenario(s) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    }
    if let Some(seed) = args.seed {
        cfg.settings.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out = out;
    }
    ExitCode::from(run(&cfg) as u8)
}
