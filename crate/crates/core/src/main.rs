use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fleetsim::cli::{parse_config, run_batch};

/// Runs fleet simulation scenarios from a config file.
#[derive(Debug, Parser)]
#[command(name = "fleetsim", version)]
struct Args {
    /// Scenario config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of every scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; defaults to $FLEETSIM_OUT, then ./out.
    #[arg(long, env = "FLEETSIM_OUT", default_value = "out")]
    out: PathBuf,
    /// Scenarios run concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Run only the named scenarios.
    #[arg(long)]
    scenario: Vec<String>,
}

const EXIT_SCENARIO_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let mut scenarios = match parse_config(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = args.seed {
        for s in &mut scenarios {
            s.sim.seed = seed;
        }
    }
    if !args.scenario.is_empty() {
        for name in &args.scenario {
            if !scenarios.iter().any(|s| &s.name == name) {
                eprintln!("config error: no scenario named `{name}`");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
        scenarios.retain(|s| args.scenario.contains(&s.name));
    }
    let report = match run_batch(&scenarios, args.parallel, &args.out) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCENARIO_FAILED);
        }
    };
    for (name, result) in &report.results {
        match result {
            Ok(k) => println!(
                "{name}: served {}/{} requests, {:.2} fleet km",
                k.served, k.requests, k.fleet_km
            ),
            Err(e) => eprintln!("{name}: FAILED: {e}"),
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
