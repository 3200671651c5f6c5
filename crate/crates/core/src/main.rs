use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wsag_market::decimal::Decimal;
use wsag_market::sim::{self, Scenario, SimError};

#[derive(Parser)]
#[command(name = "wsag-market", version, about = "Contract-aware cinema marketplace simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write transcript, trace and agreement store.
    Run {
        /// Scenario JSON file, or the name of a bundled scenario.
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Force sequential dispatch in registration order.
        #[arg(long)]
        deterministic: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Best outcome any provider would sign, by exhaustive grid search.
    Oracle {
        scenario: String,
        #[arg(long, default_value = "0.50")]
        grid: Decimal,
    },
    /// Re-run the scenario stored next to a transcript and compare.
    Replay { transcript: PathBuf },
    /// List the bundled scenarios.
    ListScenarios,
}

fn load(arg: &str) -> Result<Scenario, SimError> {
    let path = Path::new(arg);
    if path.exists() {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    } else {
        sim::bundled_scenario(arg)
    }
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("output serialization cannot fail")
    );
}

fn run(cli: Cli) -> Result<ExitCode, SimError> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            deterministic,
            out,
        } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if deterministic {
                s.deterministic_mode = true;
            }
            let report = sim::run_scenario(&s, Some(&out))?;
            print_json(&report.summary);
            eprintln!("transcript: {}", out.join(sim::TRANSCRIPT_FILE).display());
            eprintln!("store: {}", out.join(sim::STORE_DIR).display());
            Ok(if report.summary.is_confirmed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Oracle { scenario, grid } => {
            let s = load(&scenario)?;
            print_json(&sim::oracle_best_outcome(&s, grid)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { transcript } => {
            let r = sim::replay(&transcript)?;
            print_json(&r);
            Ok(if r.identical {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::ListScenarios => {
            for s in sim::bundled_scenarios() {
                println!("{:<22} {}", s.name, s.description);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
