//! Command-line scenario runner.
//!
//! Exit codes: 0 on success, 2 when the run finished but a witness verdict
//! was inconclusive, 1 on any error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use biphoton::runner::{analyze_external, run, Mode, RunOutput};
use biphoton::scenario::{Scenario, PRESET_NAMES};

#[derive(Parser)]
#[command(
    name = "biphoton",
    version,
    about = "Simulate and analyze energy-time entangled photon-pair measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file.
    #[arg(long, value_name = "PATH", conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Bundled preset name (see `biphoton presets`).
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Override the scenario's master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate count grids and histograms.
    Simulate(RunArgs),
    /// Simulate, fit, and deconvolve; or analyze external count grids.
    Analyze {
        #[command(flatten)]
        args: RunArgs,
        /// Analyze these count-grid CSVs instead of simulating.
        #[arg(long, value_name = "FILE", num_args = 1..)]
        counts: Vec<PathBuf>,
    },
    /// Full pipeline including entanglement witnesses.
    Witness(RunArgs),
    /// Everything: grids, histograms, analysis, witnesses.
    All(RunArgs),
    /// List the bundled scenario presets.
    Presets,
}

fn load(args: &RunArgs) -> Result<Scenario> {
    let mut scenario = match (&args.config, &args.scenario) {
        (Some(path), None) => {
            Scenario::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(name)) => Scenario::preset(name)?,
        (None, None) => bail!("one of --config or --scenario is required"),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    if let Some(seed) = args.seed {
        scenario.run.seed = seed;
    }
    Ok(scenario)
}

fn finish(output: RunOutput) -> ExitCode {
    for file in &output.files {
        println!("wrote {}", file.display());
    }
    if let Some(report) = &output.report {
        print!("{}", report.to_text_table());
    }
    if output.any_inconclusive {
        eprintln!("warning: at least one witness verdict is inconclusive");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<ExitCode> = (|| match cli.command {
        Command::Simulate(args) => {
            let scenario = load(&args)?;
            Ok(finish(run(&scenario, Mode::Simulate, &args.out)?))
        }
        Command::Analyze { args, counts } => {
            let scenario = load(&args)?;
            let output = if counts.is_empty() {
                run(&scenario, Mode::Analyze, &args.out)?
            } else {
                analyze_external(&scenario, &counts, &args.out)?
            };
            Ok(finish(output))
        }
        Command::Witness(args) => {
            let scenario = load(&args)?;
            Ok(finish(run(&scenario, Mode::Witness, &args.out)?))
        }
        Command::All(args) => {
            let scenario = load(&args)?;
            Ok(finish(run(&scenario, Mode::All, &args.out)?))
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                let s = Scenario::preset(name).expect("bundled presets load");
                println!(
                    "{name:8}  chirps ({:+.4}, {:+.4}) ps^2, {:.0} counts, seed {}",
                    s.state.chirp_s, s.state.chirp_i, s.run.total_counts, s.run.seed
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    })();
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
