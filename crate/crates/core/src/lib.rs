//! Oracle-efficient contextual bandits: action-selection schemes driven by
//! online square-loss regression, a hedged Tsallis-INF master, corral-style
//! aggregation over a misspecification grid, and synthetic environments for
//! simulation.

pub mod aggregation;
pub mod bandits;
pub mod env;
pub mod error;
pub mod harness;
pub mod logdet;
pub mod master;
pub mod oracle;
pub mod rng;
pub mod selectors;
pub mod types;

pub use aggregation::{Corral, CorralConfig, CorralRound, DimensionAdaptive};
pub use bandits::{default_reg_sq, tuned_gamma, BasePlus, SelectorKind, SquareCb, SquareCbConfig, SquareCbLin};
pub use env::{ActionGen, DimSchedule, EnvKind, EnvSpec, Environment, MisspecShape, NoiseKind, RoundTruth};
pub use error::{Error, Result};
pub use harness::{
    linear_fit, run, run_suite, sweep, AlgorithmSpec, AnyOracle, CheckReport, CorralEcho,
    ExperimentConfig, LinearFit, RoundRow, RunSummary, SelectorChoice, SweepAxis, SweepSummary,
    CSV_HEADER,
};
pub use logdet::{eta_rounding_check, logdet_barrier_solve, LiftedState, RoundingReport};
pub use master::{tsallis_solve, HedgedFtrlState};
pub use rng::RngStream;
pub use selectors::{igw, log_barrier, minimax_value, minimax_value_finite_arms};
pub use types::{
    affine_dimension, moments, ActionSet, ActionVector, Moments, SparseDistribution,
    AFFINE_DIM_TOL,
};
