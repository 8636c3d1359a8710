//! Experiment harness: configuration, seeded replicated runs with per-round
//! CSV logging, sweep-and-fit aggregation, and runnable invariant suites.

pub mod checks;
pub mod config;
pub mod records;
pub mod runner;

pub use checks::{run_suite, CheckReport};
pub use config::{AlgorithmSpec, ExperimentConfig, SelectorChoice};
pub use records::{
    linear_fit, CorralEcho, LinearFit, RoundRow, RunSummary, SweepSummary, CSV_HEADER,
};
pub use runner::{run, run_seed, sweep, AnyOracle, SweepAxis};
