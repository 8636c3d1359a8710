//! `ocb` command line: run one experiment config, sweep a config along an
//! axis, or execute an invariant-check suite.
//!
//! Exit codes: 0 success, 1 config error, 2 invariant failure, 3 runtime
//! contract violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ocb_core::{run, run_suite, sweep, Error, ExperimentConfig, SweepAxis};

#[derive(Parser)]
#[command(name = "ocb", version, about = "Contextual-bandit experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of one experiment config and write CSV + summary JSON.
    Run {
        /// Path to the JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $OCB_OUT_DIR, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config once per axis value and fit regret scaling laws.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Axis to vary: T, eps, or d.
        #[arg(long)]
        axis: String,
        /// Strictly ascending axis values, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an invariant suite: selectors, master, oracle, env, or all.
    Check {
        #[arg(long)]
        suite: String,
    },
}

fn out_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os("OCB_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn code_for(err: &Error) -> u8 {
    match err {
        Error::Contract(_) => 3,
        _ => 1,
    }
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let output = run(&cfg, &out_dir(out))?;
            println!("{}", serde_json::to_string_pretty(&output.summary)?);
            eprintln!(
                "wrote {} and {}",
                output.csv_path.display(),
                output.summary_path.display()
            );
            Ok(0)
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let axis: SweepAxis = axis.parse()?;
            let summary = sweep(&cfg, axis, &values, &out_dir(out))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(0)
        }
        Command::Check { suite } => {
            let report = run_suite(&suite)?;
            for line in &report.lines {
                println!("{line}");
            }
            if report.failures > 0 {
                eprintln!("{} invariant check(s) failed", report.failures);
                Ok(2)
            } else {
                Ok(0)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(code_for(&err))
        }
    }
}
