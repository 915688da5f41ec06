//! Batch experiment runner for online risk-control calibration.
//!
//! Exit codes: 0 success, 1 usage or I/O failure, 2 invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use larc_cli::config::{InvariantMode, RunConfig};
use larc_cli::runner::{self, StateFile};
use larc_cli::stream;

#[derive(Parser)]
#[command(name = "larc", about = "Online calibration with localized risk control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one calibration experiment and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir, then "out").
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's invariant mode.
        #[arg(long, value_parser = parse_invariants)]
        invariants: Option<InvariantMode>,
    },
    /// Run several configs over the identical stream and tabulate them.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        /// Where to write compare.csv (defaults to stdout only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the hold-out evaluation from a saved state snapshot.
    Replay {
        #[arg(long)]
        state: PathBuf,
        /// Hold-out events in JSON-lines form (as written by `run`).
        #[arg(long)]
        holdout: PathBuf,
        /// Output file (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_invariants(s: &str) -> Result<InvariantMode, String> {
    match s {
        "enforce" => Ok(InvariantMode::Enforce),
        "record" => Ok(InvariantMode::Record),
        "off" => Ok(InvariantMode::Off),
        other => Err(format!("unknown invariant mode {other:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(runner::exit_code_for(&err))
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            invariants,
        } => {
            let mut run_config = RunConfig::load(&config)?;
            if let Some(mode) = invariants {
                run_config.invariant_mode = mode;
            }
            let dir = out
                .or_else(|| run_config.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let output = runner::execute(&run_config)?;
            runner::write_artifacts(&output, &dir)?;
            println!(
                "{} steps, final risk {:.6} (target {}), artifacts in {}",
                output.summary.steps,
                output.summary.final_cum_risk,
                output.summary.alpha,
                dir.display()
            );
            if output.summary.violation_count > 0 {
                println!("recorded {} invariant violations", output.summary.violation_count);
            }
            Ok(())
        }
        Command::Compare { configs, out } => {
            let parsed: Vec<RunConfig> = configs
                .iter()
                .map(|p| RunConfig::load(p))
                .collect::<Result<_>>()?;
            let report = runner::compare(&parsed)?;
            let csv = runner::compare_csv(&report);
            if let Some(path) = out {
                std::fs::create_dir_all(&path)?;
                std::fs::write(path.join("compare.csv"), &csv)?;
            }
            print!("{csv}");
            Ok(())
        }
        Command::Replay { state, holdout, out } => {
            let text = std::fs::read_to_string(&state)
                .with_context(|| format!("reading {}", state.display()))?;
            let state_file: StateFile = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", state.display()))?;
            let file = std::fs::File::open(&holdout)
                .with_context(|| format!("opening {}", holdout.display()))?;
            let events = stream::read_events_jsonl(std::io::BufReader::new(file))?;
            let eval = runner::replay(&state_file, &events)?;
            match out {
                Some(path) => runner::write_json(&path, &eval)?,
                None => println!("{}", serde_json::to_string_pretty(&eval)?),
            }
            Ok(())
        }
    }
}
