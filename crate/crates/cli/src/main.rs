use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use timefluid::experiments::ScenarioKind;
use timefluid_cli::batch::run_batch;
use timefluid_cli::config::{parse_config, SweepConfig};

/// Runs parameter sweeps of the gradient, moving and channel scenarios and
/// writes per-run and merged CSV traces.
#[derive(Debug, Parser)]
#[command(name = "timefluid", version)]
struct Args {
    /// Sweep configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of simulations run concurrently; overrides the configuration.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    parallel: Option<u32>,
    /// Restrict the sweep to these scenarios (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<String>,
    /// Desk-scale preset: without --config runs a small built-in sweep,
    /// otherwise caps the configured one at desk scale, 3 seeds and 60 s.
    #[arg(long)]
    quick: bool,
}

fn load(args: &Args) -> Result<SweepConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut c = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if args.quick {
                c.quicken();
            }
            c
        }
        None if args.quick => SweepConfig::quick(),
        None => return Err("either --config or --quick is required".into()),
    };
    if !args.scenario.is_empty() {
        let wanted = args
            .scenario
            .iter()
            .map(|s| s.parse::<ScenarioKind>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        config.scenarios.retain(|k| wanted.contains(k));
        if config.scenarios.is_empty() {
            return Err("no configured scenario matches --scenario".into());
        }
    }
    if let Some(out) = &args.out {
        config.output = out.clone();
    }
    if let Some(n) = args.parallel {
        config.parallel = n as usize;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let runs = config.expand().len();
    eprintln!(
        "running {runs} simulations on {} worker(s)",
        config.parallel
    );
    match run_batch(&config) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
