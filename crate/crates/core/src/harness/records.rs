//! Log records and summaries: per-round CSV rows, per-run summary JSON, and
//! the least-squares fits used by sweeps.

use serde::{Deserialize, Serialize};

/// Stable CSV schema for per-round logs. `base` is the chosen base index for
/// aggregates and -1 for single learners; `q` is the master's selection
/// probability for aggregates and the action probability otherwise.
pub const CSV_HEADER: &str =
    "seed,t,base,q,action,loss,inst_regret,cum_regret,eps_sq_cum,solver_iters";

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    pub seed: u64,
    pub t: usize,
    pub base: i64,
    pub q: f64,
    pub action: usize,
    pub loss: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub eps_sq_cum: f64,
    pub solver_iters: usize,
}

impl RoundRow {
    /// Floats use 17 significant digits so parsing back is exact.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.seed,
            self.t,
            self.base,
            self.q,
            self.action,
            self.loss,
            self.inst_regret,
            self.cum_regret,
            self.eps_sq_cum,
            self.solver_iters
        )
    }
}

/// Config echo for Corral-family runs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorralEcho {
    pub num_bases: usize,
    pub eps_grid: Vec<f64>,
    pub hedge_r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub algorithm: String,
    pub t_horizon: usize,
    pub seeds: Vec<u64>,
    pub final_regret_mean: f64,
    pub final_regret_stderr: f64,
    /// √(mean misspec_sup_sq): upper bound on the average misspecification.
    pub eps_upper: f64,
    pub d_avg: f64,
    pub cap_hits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(default)]
    pub corral: Option<CorralEcho>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares fit of y on x. Requires at least two points.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        r2,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepSummary {
    pub axis: String,
    pub values: Vec<f64>,
    pub runs: Vec<RunSummary>,
    /// Log-log fit of mean regret vs axis value (the scaling-law exponent);
    /// absent when some value or regret is non-positive.
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(default)]
    pub loglog: Option<LinearFit>,
    /// Plain linear fit of mean regret vs axis value.
    pub linear: LinearFit,
}
