//! Seeded experiment execution: builds the learner named by the config,
//! plays it against the synthetic environment, and logs per-round rows.
//! Seeds run in parallel; each owns all of its state.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::aggregation::{Corral, CorralConfig, DimensionAdaptive};
use crate::bandits::{SelectorKind, SquareCb, SquareCbConfig, SquareCbLin};
use crate::env::{EnvKind, EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::harness::config::{AlgorithmSpec, ExperimentConfig, SelectorChoice};
use crate::harness::records::{
    linear_fit, CorralEcho, LinearFit, RoundRow, RunSummary, SweepSummary, CSV_HEADER,
};
use crate::master::HedgedFtrlState;
use crate::oracle::{FeatureMappedOns, OnsOracle, RegressionOracle};
use crate::rng::{mix_seed, RngStream};

const TAG_ENV: u64 = 20;
const TAG_NOISE: u64 = 21;
const TAG_LEARNER: u64 = 22;

/// Regression oracle dispatched on the environment kind: plain ONS over the
/// action coordinates, or ONS over the action-feature outer product for
/// contextual environments.
pub enum AnyOracle {
    Ons(OnsOracle),
    Mapped(FeatureMappedOns),
}

impl AnyOracle {
    pub fn for_env(spec: &EnvSpec) -> Self {
        match spec.kind {
            EnvKind::FiniteArm { k } => AnyOracle::Ons(OnsOracle::new(k)),
            EnvKind::LinearBandit => AnyOracle::Ons(OnsOracle::new(spec.d)),
            EnvKind::LinearContextual { feature_dim } => {
                AnyOracle::Mapped(FeatureMappedOns::new(spec.d, feature_dim))
            }
        }
    }
}

impl RegressionOracle for AnyOracle {
    fn predict(&self, context: &[f64]) -> DVector<f64> {
        match self {
            AnyOracle::Ons(o) => o.predict(context),
            AnyOracle::Mapped(o) => o.predict(context),
        }
    }

    fn update(&mut self, example: &crate::oracle::OracleExample) {
        match self {
            AnyOracle::Ons(o) => o.update(example),
            AnyOracle::Mapped(o) => o.update(example),
        }
    }

    fn reset(&mut self) {
        match self {
            AnyOracle::Ons(o) => o.reset(),
            AnyOracle::Mapped(o) => o.reset(),
        }
    }

    fn fingerprint(&self) -> u64 {
        match self {
            AnyOracle::Ons(o) => o.fingerprint(),
            AnyOracle::Mapped(o) => o.fingerprint(),
        }
    }
}

type OracleFactory = Box<dyn Fn() -> AnyOracle>;

enum Learner {
    Cb(SquareCb<AnyOracle>),
    Lin(SquareCbLin<AnyOracle>),
    Corral(Corral<AnyOracle>),
    Dim(DimensionAdaptive<AnyOracle, OracleFactory>),
    Tsallis(HedgedFtrlState),
}

fn build_learner(cfg: &ExperimentConfig, seed: u64) -> Learner {
    let env = &cfg.env;
    match &cfg.algorithm {
        AlgorithmSpec::Squarecb { selector, .. } => {
            let k = match env.kind {
                EnvKind::FiniteArm { k } => k,
                _ => unreachable!("validated"),
            };
            let sel = match selector {
                SelectorChoice::Igw => SelectorKind::Igw,
                SelectorChoice::LogBarrier => SelectorKind::LogBarrier,
            };
            let config = SquareCbConfig {
                gamma: cfg.algorithm.resolve_gamma(env).expect("baseline gamma"),
                selector: sel,
                horizon: env.t_horizon,
            };
            Learner::Cb(SquareCb::new(config, AnyOracle::for_env(env), k))
        }
        AlgorithmSpec::SquarecbLin { .. } => {
            let gamma = cfg.algorithm.resolve_gamma(env).expect("baseline gamma");
            Learner::Lin(SquareCbLin::new(gamma, AnyOracle::for_env(env)))
        }
        AlgorithmSpec::Corral => {
            let config = CorralConfig::new(env.t_horizon, env.d);
            let spec = env.clone();
            Learner::Corral(Corral::new(
                config,
                mix_seed(seed, &[TAG_LEARNER]),
                move || AnyOracle::for_env(&spec),
            ))
        }
        AlgorithmSpec::CorralDimAdaptive => {
            let spec = env.clone();
            let factory: OracleFactory = Box::new(move || AnyOracle::for_env(&spec));
            Learner::Dim(DimensionAdaptive::new(
                env.t_horizon,
                env.d,
                mix_seed(seed, &[TAG_LEARNER]),
                factory,
            ))
        }
        AlgorithmSpec::TsallisMab { eta } => {
            let k = match env.kind {
                EnvKind::FiniteArm { k } => k,
                _ => unreachable!("validated"),
            };
            let eta = eta.unwrap_or_else(|| HedgedFtrlState::default_eta(env.t_horizon));
            Learner::Tsallis(HedgedFtrlState::new(k, 0.5, 0.0, eta))
        }
    }
}

/// One replicate's rows plus the aggregates the summary needs.
pub struct SeedRun {
    pub rows: Vec<RoundRow>,
    pub final_regret: f64,
    pub eps_sq_sum: f64,
    pub dim_sum: usize,
    pub cap_hits: usize,
}

/// Plays one seed start to finish. All randomness derives from `seed`:
/// the environment, the loss noise, and the learner use disjoint streams.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let env = Environment::new(cfg.env.clone(), mix_seed(seed, &[TAG_ENV]))?;
    let t_horizon = cfg.env.t_horizon;
    let mut learner = build_learner(cfg, seed);
    let mut noise_rng = RngStream::derive(seed, &[TAG_NOISE]);
    let mut learner_rng = RngStream::derive(seed, &[TAG_LEARNER]);

    let mut rows = Vec::with_capacity(t_horizon);
    let mut cum_regret = 0.0;
    let mut eps_sq_cum = 0.0;
    let mut dim_sum = 0usize;
    for t in 0..t_horizon {
        let (context, set) = env.emit(t);
        let (idx, base, q, iters) = match &mut learner {
            Learner::Cb(l) => {
                let i = l.choose(&context, &mut learner_rng);
                let q = l.p_last().expect("just chose").prob(i);
                (i, -1, q, 0)
            }
            Learner::Lin(l) => {
                let i = l.choose(&context, &set, &mut learner_rng)?;
                let q = l.p_last().expect("just chose").prob(i);
                (i, -1, q, l.last_iterations())
            }
            Learner::Corral(c) => {
                let i = c.choose(&context, &set)?;
                let r = c.last_round().expect("just chose");
                (i, r.base as i64, r.q, r.iterations)
            }
            Learner::Dim(d) => {
                let i = d.choose(t, &context, &set)?;
                let r = d.inner().last_round().expect("just chose");
                (i, r.base as i64, r.q, r.iterations)
            }
            Learner::Tsallis(m) => {
                let (arm, q, _) = m.sample(&mut learner_rng);
                (arm, -1, q, 0)
            }
        };
        let action = set.get(idx).coords().clone();
        let loss = env.loss(t, &context, &action, &mut noise_rng);
        match &mut learner {
            Learner::Cb(l) => l.observe(loss),
            Learner::Lin(l) => l.observe(loss),
            Learner::Corral(c) => c.observe(loss)?,
            Learner::Dim(d) => d.observe(loss)?,
            Learner::Tsallis(m) => m.update(idx, loss + 1.0)?,
        }
        let truth = env.truth(t, &context, &set, idx);
        cum_regret += truth.played_mean_loss - truth.best_mean_loss;
        eps_sq_cum += truth.misspec_sup_sq;
        dim_sum += set.affine_dim().max(1);
        rows.push(RoundRow {
            seed,
            t,
            base,
            q,
            action: idx,
            loss,
            inst_regret: truth.played_mean_loss - truth.best_mean_loss,
            cum_regret,
            eps_sq_cum,
            solver_iters: iters,
        });
    }
    let cap_hits = match &learner {
        Learner::Lin(l) => l.cap_hits(),
        Learner::Corral(c) => c.total_cap_hits(),
        Learner::Dim(d) => d.inner().total_cap_hits(),
        _ => 0,
    };
    Ok(SeedRun {
        rows,
        final_regret: cum_regret,
        eps_sq_sum: eps_sq_cum,
        dim_sum,
        cap_hits,
    })
}

fn summarize(cfg: &ExperimentConfig, runs: &[SeedRun]) -> RunSummary {
    let n = runs.len() as f64;
    let t = cfg.env.t_horizon as f64;
    let mean = runs.iter().map(|r| r.final_regret).sum::<f64>() / n;
    let stderr = if runs.len() > 1 {
        let var = runs
            .iter()
            .map(|r| (r.final_regret - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let eps_upper =
        (runs.iter().map(|r| r.eps_sq_sum).sum::<f64>() / (n * t)).sqrt();
    let d_avg = runs.iter().map(|r| r.dim_sum as f64).sum::<f64>() / (n * t);
    let corral = match cfg.algorithm {
        AlgorithmSpec::Corral | AlgorithmSpec::CorralDimAdaptive => {
            let config = CorralConfig::new(cfg.env.t_horizon, cfg.env.d);
            Some(CorralEcho {
                num_bases: config.num_bases(),
                eps_grid: config.eps_grid(),
                hedge_r: config.hedge_r(),
            })
        }
        _ => None,
    };
    RunSummary {
        algorithm: cfg.algorithm.slug().to_string(),
        t_horizon: cfg.env.t_horizon,
        seeds: cfg.seeds.clone(),
        final_regret_mean: mean,
        final_regret_stderr: stderr,
        eps_upper,
        d_avg,
        cap_hits: runs.iter().map(|r| r.cap_hits).sum(),
        corral,
    }
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Executes every seed (in parallel), then writes `<name>.csv` and
/// `<name>_summary.json` under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let runs: Vec<SeedRun> = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s))
        .collect::<Result<_>>()?;
    let summary = summarize(cfg, &runs);

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &runs {
        for row in &r.rows {
            csv.push_str(&row.to_csv());
            csv.push('\n');
        }
    }
    let name = cfg.name();
    let csv_path = out_dir.join(format!("{name}.csv"));
    let summary_path = out_dir.join(format!("{name}_summary.json"));
    std::fs::write(&csv_path, csv)?;
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutput {
        summary,
        csv_path,
        summary_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    T,
    Eps,
    D,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" | "t" => Ok(SweepAxis::T),
            "eps" => Ok(SweepAxis::Eps),
            "d" => Ok(SweepAxis::D),
            other => Err(Error::Config(format!(
                "unknown sweep axis {other:?} (expected T, eps, or d)"
            ))),
        }
    }
}

fn as_positive_int(v: f64, what: &str) -> Result<usize> {
    let r = v.round();
    if !(r >= 1.0 && (v - r).abs() < 1e-9) {
        return Err(Error::Config(format!("{what} value {v} must be a positive integer")));
    }
    Ok(r as usize)
}

fn apply_axis(cfg: &mut ExperimentConfig, axis: SweepAxis, v: f64) -> Result<()> {
    match axis {
        SweepAxis::T => cfg.env.t_horizon = as_positive_int(v, "T")?,
        SweepAxis::Eps => cfg.env.eps_level = v,
        SweepAxis::D => {
            cfg.env.d = as_positive_int(v, "d")?;
            if let EnvKind::FiniteArm { ref mut k } = cfg.env.kind {
                *k = cfg.env.d;
            }
        }
    }
    Ok(())
}

/// One run per axis value, plus least-squares fits of mean final regret
/// against the axis (log-log when everything is positive, linear always).
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "sweep values must be strictly ascending".into(),
        ));
    }
    let axis_name = match axis {
        SweepAxis::T => "T",
        SweepAxis::Eps => "eps",
        SweepAxis::D => "d",
    };
    let mut runs = Vec::with_capacity(values.len());
    for &v in values {
        let mut point = cfg.clone();
        apply_axis(&mut point, axis, v)?;
        point.output = Some(format!("{}_{}{}", cfg.name(), axis_name, v));
        runs.push(run(&point, out_dir)?.summary);
    }
    let regrets: Vec<f64> = runs.iter().map(|r| r.final_regret_mean).collect();
    let loglog = if values.len() >= 2
        && values.iter().all(|&v| v > 0.0)
        && regrets.iter().all(|&r| r > 0.0)
    {
        let lx: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = regrets.iter().map(|r| r.ln()).collect();
        Some(linear_fit(&lx, &ly))
    } else {
        None
    };
    let linear = if values.len() >= 2 {
        linear_fit(values, &regrets)
    } else {
        LinearFit {
            slope: 0.0,
            intercept: regrets[0],
            r2: 1.0,
        }
    };
    let summary = SweepSummary {
        axis: axis_name.to_string(),
        values: values.to_vec(),
        runs,
        loglog,
        linear,
    };
    std::fs::write(
        out_dir.join(format!("{}_sweep.json", cfg.name())),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionGen, MisspecShape, NoiseKind};

    fn small_config(algorithm: AlgorithmSpec) -> ExperimentConfig {
        ExperimentConfig {
            env: EnvSpec {
                d: 3,
                kind: EnvKind::LinearBandit,
                t_horizon: 100,
                eps_level: 0.0,
                misspec_shape: MisspecShape::None,
                action_gen: ActionGen::ResampleSphere { k: 5 },
                noise: NoiseKind::UniformBand,
            },
            algorithm,
            seeds: vec![1, 2],
            output: None,
        }
    }

    fn finite_config(algorithm: AlgorithmSpec) -> ExperimentConfig {
        let mut cfg = small_config(algorithm);
        cfg.env.kind = EnvKind::FiniteArm { k: 3 };
        cfg.env.action_gen = ActionGen::FixedBasis;
        cfg.env.noise = NoiseKind::BernoulliPm1;
        cfg
    }

    #[test]
    fn squarecb_run_writes_expected_row_count() {
        let cfg = finite_config(AlgorithmSpec::Squarecb {
            gamma: Some(10.0),
            eps_known: None,
            selector: SelectorChoice::Igw,
        });
        let dir = std::env::temp_dir().join("ocb_harness_rows");
        let out = run(&cfg, &dir).unwrap();
        let text = std::fs::read_to_string(&out.csv_path).unwrap();
        assert_eq!(text.lines().count(), 201);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let cfg = small_config(AlgorithmSpec::SquarecbLin {
            gamma: Some(20.0),
            eps_known: None,
        });
        let dir = std::env::temp_dir().join("ocb_harness_det");
        let a = run(&cfg, &dir).unwrap();
        let first = std::fs::read(&a.csv_path).unwrap();
        let b = run(&cfg, &dir).unwrap();
        let second = std::fs::read(&b.csv_path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn seed_runs_are_independent_of_seed_list() {
        let mut cfg = small_config(AlgorithmSpec::SquarecbLin {
            gamma: Some(20.0),
            eps_known: None,
        });
        let solo = run_seed(&cfg, 2).unwrap();
        cfg.seeds = vec![1, 2, 3];
        let dir = std::env::temp_dir().join("ocb_harness_ind");
        let out = run(&cfg, &dir).unwrap();
        let text = std::fs::read_to_string(&out.csv_path).unwrap();
        let seed2_rows: Vec<&str> = text
            .lines()
            .skip(1)
            .filter(|l| l.starts_with("2,"))
            .collect();
        assert_eq!(seed2_rows.len(), solo.rows.len());
        for (line, row) in seed2_rows.iter().zip(&solo.rows) {
            assert_eq!(*line, row.to_csv());
        }
    }

    #[test]
    fn corral_summary_echoes_grid() {
        let mut cfg = small_config(AlgorithmSpec::Corral);
        cfg.env.t_horizon = 1000;
        cfg.seeds = vec![1];
        let dir = std::env::temp_dir().join("ocb_harness_echo");
        let out = run(&cfg, &dir).unwrap();
        let echo = out.summary.corral.unwrap();
        assert_eq!(echo.num_bases, 6);
        assert_eq!(echo.eps_grid.len(), 6);
        assert!((echo.eps_grid[0] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn cumulative_columns_are_prefix_sums() {
        let cfg = small_config(AlgorithmSpec::SquarecbLin {
            gamma: Some(20.0),
            eps_known: None,
        });
        let r = run_seed(&cfg, 5).unwrap();
        let mut cum = 0.0;
        for row in &r.rows {
            cum += row.inst_regret;
            assert!((row.cum_regret - cum).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_rejects_bad_values() {
        let cfg = small_config(AlgorithmSpec::SquarecbLin {
            gamma: Some(20.0),
            eps_known: None,
        });
        let dir = std::env::temp_dir().join("ocb_harness_sweep_bad");
        assert!(sweep(&cfg, SweepAxis::T, &[], &dir).is_err());
        assert!(sweep(&cfg, SweepAxis::T, &[200.0, 100.0], &dir).is_err());
    }

    #[test]
    fn t_sweep_emits_one_summary_per_value() {
        let mut cfg = small_config(AlgorithmSpec::SquarecbLin {
            gamma: None,
            eps_known: None,
        });
        cfg.seeds = vec![1, 2, 3];
        let dir = std::env::temp_dir().join("ocb_harness_sweep_t");
        let s = sweep(&cfg, SweepAxis::T, &[50.0, 100.0, 200.0], &dir).unwrap();
        assert_eq!(s.runs.len(), 3);
        assert!(s.loglog.is_some());
    }

    #[test]
    fn tsallis_runs_over_finite_arms() {
        let cfg = finite_config(AlgorithmSpec::TsallisMab { eta: None });
        let r = run_seed(&cfg, 1).unwrap();
        assert_eq!(r.rows.len(), 100);
        assert!(r.rows.iter().all(|row| row.base == -1));
    }
}
