//! Runnable invariant suites behind the `check` subcommand. Every check uses
//! fixed internal seeds so a pass/fail is reproducible.

use nalgebra::DVector;

use crate::aggregation::{Corral, CorralConfig};
use crate::env::{ActionGen, EnvKind, EnvSpec, Environment, MisspecShape, NoiseKind};
use crate::error::{Error, Result};
use crate::logdet::logdet_barrier_solve;
use crate::master::{tsallis_solve, HedgedFtrlState};
use crate::oracle::{OnsOracle, OracleExample, RegressionOracle, WeightedReduction};
use crate::rng::RngStream;
use crate::selectors::{igw, log_barrier, minimax_value, minimax_value_finite_arms};
use crate::types::{ActionSet, ActionVector};

type CheckFn = fn() -> std::result::Result<(), String>;

pub struct CheckReport {
    pub lines: Vec<String>,
    pub failures: usize,
}

fn run_checks(suite: &str, checks: &[(&str, CheckFn)]) -> CheckReport {
    let mut lines = Vec::new();
    let mut failures = 0;
    for (name, f) in checks {
        match f() {
            Ok(()) => lines.push(format!("[pass] {suite}::{name}")),
            Err(msg) => {
                failures += 1;
                lines.push(format!("[FAIL] {suite}::{name}: {msg}"));
            }
        }
    }
    CheckReport { lines, failures }
}

/// Runs the named suite (`selectors`, `master`, `oracle`, `env`, or `all`).
pub fn run_suite(suite: &str) -> Result<CheckReport> {
    let selectors: &[(&str, CheckFn)] = &[
        ("igw sums to one with floored exploration", igw_shape),
        (
            "(K-1)/gamma exact minimax value of the log-barrier",
            log_barrier_minimax,
        ),
        ("log-barrier KKT stationarity", log_barrier_kkt),
        ("eta-rounding certificate", rounding_certificate),
        ("frank-wolfe objective trace non-increasing", fw_monotone),
        ("one-dimensional logdet closed form", logdet_1d),
    ];
    let master: &[(&str, CheckFn)] = &[
        ("tsallis solution normalized and monotone", tsallis_shape),
        (
            "ledger identity B = R*rho^alpha after bias events",
            ledger_identity,
        ),
        (
            "bias increments within [0, importance-weighted loss]",
            ledger_bracket,
        ),
        (
            "tsallis-inf regret under 4*sqrt(2MT) at R = 0",
            tsallis_regret_bound,
        ),
        ("importance record non-decreasing", rho_monotone),
        (
            "corral regret decomposition bookkeeping",
            regret_decomposition,
        ),
        (
            "small-eps bases carry the master mass when well-specified",
            small_eps_dominates,
        ),
    ];
    let oracle: &[(&str, CheckFn)] = &[
        ("ons recovers a planted linear model", ons_recovers),
        (
            "ons square-loss regret within logarithmic budget",
            ons_regret_budget,
        ),
        (
            "constant weights update at rate half after one reset",
            weighted_half_rate,
        ),
        ("reset count within the doubling bound", weighted_reset_bound),
    ];
    let env: &[(&str, CheckFn)] = &[
        ("emission is a pure function of seed and round", env_oblivious),
        ("losses stay within per-kind bounds", env_loss_bounds),
        ("bernoulli loss mean matches mu", env_bernoulli_mean),
        (
            "well-specified environments report zero misspecification",
            env_zero_eps,
        ),
        ("corrupted rounds obey the sqrt(C/T) budget", env_corrupt_budget),
        (
            "sinusoidal misspecification bounded and non-degenerate",
            env_sinusoidal_band,
        ),
    ];
    let report = match suite {
        "selectors" => run_checks("selectors", selectors),
        "master" => run_checks("master", master),
        "oracle" => run_checks("oracle", oracle),
        "env" => run_checks("env", env),
        "all" => {
            let mut lines = Vec::new();
            let mut failures = 0;
            for (name, list) in [
                ("selectors", selectors),
                ("master", master),
                ("oracle", oracle),
                ("env", env),
            ] {
                let r = run_checks(name, list);
                lines.extend(r.lines);
                failures += r.failures;
            }
            CheckReport { lines, failures }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown check suite {other:?} (expected selectors, master, oracle, env, all)"
            )))
        }
    };
    Ok(report)
}

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_theta(rng: &mut RngStream, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.uniform_in(-1.0, 1.0)).collect()
}

fn igw_shape() -> std::result::Result<(), String> {
    let mut rng = RngStream::new(11);
    for _ in 0..50 {
        let k = 2 + rng.index(5);
        let theta = random_theta(&mut rng, k);
        let gamma = rng.uniform_in(1.0, 100.0);
        let p = igw(&theta, gamma);
        let total: f64 = (0..k).map(|i| p.prob(i)).sum();
        ensure((total - 1.0).abs() < 1e-9, format!("mass {total}"))?;
        let best = (0..k).fold(0, |b, i| if theta[i] < theta[b] { i } else { b });
        for i in 0..k {
            if i != best {
                let want = 1.0 / (k as f64 + gamma * (theta[i] - theta[best]));
                ensure(
                    (p.prob(i) - want).abs() < 1e-9,
                    format!("arm {i}: {} vs {want}", p.prob(i)),
                )?;
            }
        }
    }
    Ok(())
}

fn log_barrier_minimax() -> std::result::Result<(), String> {
    let mut rng = RngStream::new(12);
    for _ in 0..20 {
        let k = 2 + rng.index(5);
        let theta = random_theta(&mut rng, k);
        let gamma = rng.uniform_in(1.0, 100.0);
        let p = log_barrier(&theta, gamma);
        let v = minimax_value_finite_arms(&p, &theta, gamma);
        let want = (k as f64 - 1.0) / gamma;
        ensure((v - want).abs() <= 1e-6, format!("value {v} vs {want}"))?;
    }
    Ok(())
}

fn log_barrier_kkt() -> std::result::Result<(), String> {
    let mut rng = RngStream::new(13);
    for _ in 0..20 {
        let k = 2 + rng.index(5);
        let theta = random_theta(&mut rng, k);
        let gamma = rng.uniform_in(1.0, 100.0);
        let p = log_barrier(&theta, gamma);
        let stats: Vec<f64> = (0..k)
            .map(|i| theta[i] - 1.0 / (gamma * p.prob(i)))
            .collect();
        let spread = stats.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - stats.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(spread < 1e-7, format!("stationarity spread {spread}"))?;
    }
    Ok(())
}

fn random_set(rng: &mut RngStream, d: usize, n: usize) -> ActionSet {
    ActionSet::new(
        (0..n)
            .map(|_| {
                let v = rng.unit_sphere(d);
                let scale = rng.uniform_in(0.3, 1.0);
                ActionVector::new(v.iter().map(|x| x * scale).collect()).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

fn rounding_certificate() -> std::result::Result<(), String> {
    let mut rng = RngStream::new(14);
    let eta = 0.5;
    for _ in 0..10 {
        let d = 2 + rng.index(3);
        let n = d + 2 + rng.index(20);
        let set = random_set(&mut rng, d, n);
        let theta = DVector::from_iterator(d, (0..d).map(|_| rng.uniform_in(-1.0, 1.0)));
        let gamma = rng.uniform_in(5.0, 50.0);
        let (p, report) = logdet_barrier_solve(&set, &theta, gamma / (1.0 + eta), eta)
            .map_err(|e| e.to_string())?;
        ensure(
            report.eta_achieved <= eta + 1e-9,
            format!("eta achieved {}", report.eta_achieved),
        )?;
        let v = minimax_value(&p, &theta, gamma, &set);
        let bound = (1.0 + 2.0 * eta) * set.affine_dim() as f64 / gamma;
        ensure(v <= bound + 1e-9, format!("minimax {v} > bound {bound}"))?;
    }
    Ok(())
}

fn fw_monotone() -> std::result::Result<(), String> {
    let mut rng = RngStream::new(15);
    for _ in 0..10 {
        let d = 2 + rng.index(3);
        let n = d + 2 + rng.index(15);
        let set = random_set(&mut rng, d, n);
        let theta = DVector::from_iterator(d, (0..d).map(|_| rng.uniform_in(-1.0, 1.0)));
        let (_, report) = logdet_barrier_solve(&set, &theta, 10.0, 0.5)
            .map_err(|e| e.to_string())?;
        for w in report.objective_trace.windows(2) {
            ensure(w[1] <= w[0] + 1e-9, format!("trace rose {} -> {}", w[0], w[1]))?;
        }
    }
    Ok(())
}

fn logdet_1d() -> std::result::Result<(), String> {
    let set = ActionSet::new(vec![
        ActionVector::new(vec![-1.0]).unwrap(),
        ActionVector::new(vec![1.0]).unwrap(),
    ])
    .unwrap();
    let theta = DVector::from_element(1, 1.0);
    let (p, _) = logdet_barrier_solve(&set, &theta, 2.0, 0.05).map_err(|e| e.to_string())?;
    let mean = -p.prob(0) + p.prob(1);
    let want = (1.0 - 5.0f64.sqrt()) / 2.0;
    ensure(
        (mean - want).abs() < 0.02,
        format!("mean action {mean} vs {want}"),
    )
}

fn tsallis_shape() -> std::result::Result<(), String> {
    let l = [3.0, 1.0, 2.0, 1.0];
    let p = tsallis_solve(&l, 0.1);
    let total: f64 = p.iter().sum();
    ensure((total - 1.0).abs() < 1e-9, format!("mass {total}"))?;
    ensure(p[1] > p[2] && p[2] > p[0], "ordering violated")?;
    ensure((p[1] - p[3]).abs() < 1e-9, "ties must split evenly")
}

fn drive_master<F>(seed: u64, m: usize, t: usize, r: f64, mut each: F) -> std::result::Result<(), String>
where
    F: FnMut(&HedgedFtrlState, usize, f64, f64) -> std::result::Result<(), String>,
{
    let mut rng = RngStream::new(seed);
    let eta = HedgedFtrlState::default_eta(t);
    let mut state = HedgedFtrlState::new(m, 0.5, r, eta);
    for _ in 0..t {
        let (arm, q, _) = state.sample(&mut rng);
        let loss = rng.uniform_in(0.0, 2.0);
        state.update(arm, loss).map_err(|e| e.to_string())?;
        each(&state, arm, q, loss)?;
    }
    Ok(())
}

fn ledger_identity() -> std::result::Result<(), String> {
    for seed in 0..5u64 {
        let m = 3 + (seed as usize % 4);
        let r = 5.0;
        let alpha = 0.5;
        drive_master(100 + seed, m, 400, r, |state, arm, _q, _loss| {
            if state.last_bias().is_some() {
                // After an event the ledger sits exactly on the constraint
                // for the tentative next distribution, hence on R*rho^alpha
                // once rho absorbs it at the next sample.
                let mut probe = state.clone();
                let mut scratch = RngStream::new(0);
                probe.sample(&mut scratch);
                let b = state.ledger()[arm];
                let want = r * probe.rho()[arm].powf(alpha);
                if (b - want).abs() > 1e-6 * want.max(1.0) {
                    return Err(format!("ledger {b} vs R*rho^alpha {want}"));
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn ledger_bracket() -> std::result::Result<(), String> {
    for seed in 0..5u64 {
        drive_master(200 + seed, 5, 400, 5.0, |state, _arm, q, loss| {
            if let Some(b) = state.last_bias() {
                let ell_hat = loss / q;
                if !(b >= -1e-12 && b <= ell_hat + 1e-9) {
                    return Err(format!("bias {b} outside [0, {ell_hat}]"));
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn tsallis_regret_bound() -> std::result::Result<(), String> {
    let m = 10;
    let t = 2000;
    let losses = |rng: &mut RngStream, round: usize| -> Vec<f64> {
        if round < t / 2 {
            (0..m)
                .map(|i| if i == round % m { 0.5 } else { 1.5 })
                .collect()
        } else {
            (0..m)
                .map(|i| {
                    let mean: f64 = if i == 0 { 0.6 } else { 1.0 };
                    rng.uniform_in((mean - 0.5).max(0.0), (mean + 0.5).min(2.0))
                })
                .collect()
        }
    };
    let mut total = 0.0;
    let seeds = 10;
    for seed in 0..seeds {
        let mut env_rng = RngStream::derive(seed, &[1]);
        let mut play_rng = RngStream::derive(seed, &[2]);
        let mut state = HedgedFtrlState::new(m, 0.5, 0.0, HedgedFtrlState::default_eta(t));
        let mut played = 0.0;
        let mut per_arm = vec![0.0; m];
        for round in 0..t {
            let l = losses(&mut env_rng, round);
            let (arm, _, _) = state.sample(&mut play_rng);
            played += l[arm];
            for i in 0..m {
                per_arm[i] += l[i];
            }
            state.update(arm, l[arm]).map_err(|e| e.to_string())?;
        }
        let best = per_arm.iter().cloned().fold(f64::INFINITY, f64::min);
        total += played - best;
    }
    let mean = total / seeds as f64;
    let bound = 4.0 * (2.0 * m as f64 * t as f64).sqrt();
    ensure(mean <= bound, format!("mean regret {mean} > {bound}"))
}

fn rho_monotone() -> std::result::Result<(), String> {
    let mut prev = vec![0.0; 5];
    drive_master(300, 5, 500, 5.0, |state, _, _, _| {
        for (p, r) in prev.iter_mut().zip(state.rho()) {
            if *r < *p - 1e-12 {
                return Err(format!("rho dropped {p} -> {r}"));
            }
            *p = *r;
        }
        Ok(())
    })
}

fn corral_env() -> EnvSpec {
    EnvSpec {
        d: 2,
        kind: EnvKind::LinearBandit,
        t_horizon: 300,
        eps_level: 0.0,
        misspec_shape: MisspecShape::None,
        action_gen: ActionGen::ResampleSphere { k: 5 },
        noise: NoiseKind::UniformBand,
    }
}

fn regret_decomposition() -> std::result::Result<(), String> {
    let spec = corral_env();
    let t = spec.t_horizon;
    let m_star = 0usize;
    let seeds = 30;
    let mut diffs = Vec::with_capacity(seeds as usize);
    for seed in 0..seeds {
        let env = Environment::new(spec.clone(), seed).map_err(|e| e.to_string())?;
        let config = CorralConfig::new(t, spec.d);
        let mut corral = Corral::new(config, seed + 1000, || OnsOracle::new(spec.d));
        let mut noise = RngStream::derive(seed, &[7]);
        let (mut master_term, mut base_term) = (0.0, 0.0);
        let (mut realized, mut best_sum, mut played_mean) = (0.0, 0.0, 0.0);
        for round in 0..t {
            let (ctx, set) = env.emit(round);
            let idx = corral.choose(&ctx, &set).map_err(|e| e.to_string())?;
            let q_star = corral.master().p_current()[m_star];
            let chosen = corral.last_round().unwrap().base;
            let loss = env.loss(round, &ctx, set.get(idx).coords(), &mut noise);
            corral.observe(loss).map_err(|e| e.to_string())?;
            let truth = env.truth(round, &ctx, &set, idx);
            let z = if chosen == m_star { 1.0 } else { 0.0 };
            let shifted = loss + 1.0;
            master_term += shifted - (z / q_star) * shifted;
            base_term += (z / q_star) * shifted - (truth.best_mean_loss + 1.0);
            realized += loss;
            best_sum += truth.best_mean_loss;
            played_mean += truth.played_mean_loss;
        }
        // Exact telescoping identity per seed.
        let lhs = master_term + base_term;
        let rhs = realized - best_sum;
        if (lhs - rhs).abs() > 1e-8 * t as f64 {
            return Err(format!("identity broke: {lhs} vs {rhs}"));
        }
        // The gap to the measured (mean-loss) regret is pure noise.
        diffs.push(lhs - (played_mean - best_sum));
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = (var / n).sqrt();
    ensure(
        mean.abs() <= 3.0 * sigma.max(1e-9),
        format!("decomposition off by {mean} (3 sigma = {})", 3.0 * sigma),
    )
}

fn small_eps_dominates() -> std::result::Result<(), String> {
    let mut spec = corral_env();
    spec.t_horizon = 4000;
    let t = spec.t_horizon;
    let config = CorralConfig::new(t, spec.d);
    let num_bases = config.num_bases();
    let seeds = 10;
    let mut masses = vec![Vec::new(); num_bases];
    for seed in 0..seeds {
        let env = Environment::new(spec.clone(), seed).map_err(|e| e.to_string())?;
        let mut corral = Corral::new(config.clone(), seed + 2000, || OnsOracle::new(spec.d));
        let mut noise = RngStream::derive(seed, &[7]);
        for round in 0..t {
            let (ctx, set) = env.emit(round);
            let idx = corral.choose(&ctx, &set).map_err(|e| e.to_string())?;
            let loss = env.loss(round, &ctx, set.get(idx).coords(), &mut noise);
            corral.observe(loss).map_err(|e| e.to_string())?;
        }
        for (i, &p) in corral.master().p_current().iter().enumerate() {
            masses[i].push(p);
        }
    }
    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let med: Vec<f64> = masses.iter_mut().map(median).collect();
    let top = (0..num_bases).fold(0, |b, i| if med[i] > med[b] { i } else { b });
    // The grid is eps'_m = e^{-m}; larger index means smaller guess. In the
    // well-specified regime the conservative large-eps bases must not win.
    ensure(
        top >= num_bases / 2,
        format!("largest median mass at base {top} of {num_bases} (medians {med:?})"),
    )?;
    ensure(
        med[num_bases - 1] >= med[0],
        format!("smallest-eps base below largest-eps base: {med:?}"),
    )
}

fn ons_recovers() -> std::result::Result<(), String> {
    let d = 4;
    let mut rng = RngStream::new(40);
    let theta_star = DVector::from_vec(rng.unit_sphere(d)) * 0.8;
    let mut oracle = OnsOracle::new(d);
    for _ in 0..800 {
        let a = DVector::from_vec(rng.unit_sphere(d));
        let loss = a.dot(&theta_star);
        let ex = OracleExample::new(1.0, vec![], a, loss).unwrap();
        oracle.update(&ex);
    }
    let err = (oracle.theta() - &theta_star).norm();
    ensure(err < 0.1, format!("parameter error {err}"))
}

fn ons_regret_budget() -> std::result::Result<(), String> {
    let d = 4;
    let t = 1000;
    let mut rng = RngStream::new(41);
    let theta_star = DVector::from_vec(rng.unit_sphere(d)) * 0.8;
    let mut oracle = OnsOracle::new(d);
    let mut regret = 0.0;
    for _ in 0..t {
        let a = DVector::from_vec(rng.unit_sphere(d));
        let loss = a.dot(&theta_star);
        let pred = oracle.predict(&[]).dot(&a);
        regret += (pred - loss).powi(2);
        let ex = OracleExample::new(1.0, vec![], a, loss).unwrap();
        oracle.update(&ex);
    }
    let budget = 10.0 * d as f64 * ((t as f64) + 1.0).ln();
    ensure(regret <= budget, format!("square-loss regret {regret} > {budget}"))
}

fn weighted_half_rate() -> std::result::Result<(), String> {
    let mut red = WeightedReduction::new(OnsOracle::new(2));
    let mut rng = RngStream::new(42);
    let t = 10_000;
    // The first predict performs the single reset and pins w_max = 2w, so
    // every later update forwards with probability exactly 1/2.
    red.predict_weighted(1.0, &[]);
    for _ in 0..t {
        red.predict_weighted(1.0, &[]);
        let ex =
            OracleExample::new(1.0, vec![], DVector::from_vec(rng.unit_sphere(2)), 0.0).unwrap();
        red.update_weighted(&ex, &mut rng);
    }
    ensure(red.resets() == 1, format!("resets {}", red.resets()))?;
    let forwarded = red.updates_forwarded() as f64;
    let n = t as f64;
    let sigma = (0.25 * n).sqrt();
    ensure(
        (forwarded - 0.5 * n).abs() <= 3.0 * sigma,
        format!("forward count {forwarded} vs n/2 = {}", 0.5 * n),
    )
}

fn weighted_reset_bound() -> std::result::Result<(), String> {
    let mut red = WeightedReduction::new(OnsOracle::new(2));
    let mut rng = RngStream::new(43);
    let mut w_min = f64::INFINITY;
    let mut w_max = 0.0f64;
    for _ in 0..2000 {
        let w = (2.0f64).powf(rng.uniform_in(0.0, 20.0));
        w_min = w_min.min(w);
        w_max = w_max.max(w);
        red.predict_weighted(w, &[]);
        let ex =
            OracleExample::new(w, vec![], DVector::from_vec(rng.unit_sphere(2)), 0.0).unwrap();
        red.update_weighted(&ex, &mut rng);
    }
    let bound = (w_max / w_min).log2().ceil() as usize + 1;
    ensure(
        red.resets() <= bound,
        format!("resets {} > log2 bound {bound}", red.resets()),
    )
}

fn env_spec_basic() -> EnvSpec {
    EnvSpec {
        d: 3,
        kind: EnvKind::LinearBandit,
        t_horizon: 200,
        eps_level: 0.1,
        misspec_shape: MisspecShape::Sinusoidal,
        action_gen: ActionGen::ResampleSphere { k: 6 },
        noise: NoiseKind::UniformBand,
    }
}

fn env_oblivious() -> std::result::Result<(), String> {
    let spec = env_spec_basic();
    let a = Environment::new(spec.clone(), 77).map_err(|e| e.to_string())?;
    let b = Environment::new(spec, 77).map_err(|e| e.to_string())?;
    for t in 0..50 {
        let (xa, sa) = a.emit(t);
        let (xb, sb) = b.emit(t);
        if xa != xb || sa.len() != sb.len() {
            return Err(format!("round {t} differs across instances"));
        }
        for i in 0..sa.len() {
            if sa.get(i).coords() != sb.get(i).coords() {
                return Err(format!("round {t} action {i} differs"));
            }
        }
    }
    Ok(())
}

fn env_loss_bounds() -> std::result::Result<(), String> {
    for noise in [NoiseKind::BernoulliPm1, NoiseKind::UniformBand] {
        let mut spec = env_spec_basic();
        spec.noise = noise.clone();
        let env = Environment::new(spec, 5).map_err(|e| e.to_string())?;
        let mut rng = RngStream::new(6);
        for t in 0..200 {
            let (ctx, set) = env.emit(t);
            let a = set.get(rng.index(set.len())).coords().clone();
            let l = env.loss(t, &ctx, &a, &mut rng);
            if !(-1.0..=1.0).contains(&l) {
                return Err(format!("loss {l} out of range"));
            }
            if noise == NoiseKind::BernoulliPm1 && l.abs() != 1.0 {
                return Err(format!("bernoulli loss {l} not in {{-1, 1}}"));
            }
        }
    }
    Ok(())
}

fn env_bernoulli_mean() -> std::result::Result<(), String> {
    let mut spec = env_spec_basic();
    spec.noise = NoiseKind::BernoulliPm1;
    spec.eps_level = 0.0;
    spec.misspec_shape = MisspecShape::None;
    let env = Environment::new(spec, 8).map_err(|e| e.to_string())?;
    let (ctx, set) = env.emit(0);
    let a = set.get(0).coords().clone();
    let mu = env.mean_loss(0, &ctx, &a);
    let n = 100_000;
    let mut rng = RngStream::new(9);
    let mut sum = 0.0;
    for _ in 0..n {
        sum += env.loss(0, &ctx, &a, &mut rng);
    }
    let emp = sum / n as f64;
    let sigma = ((1.0 - mu * mu) / n as f64).sqrt();
    ensure(
        (emp - mu).abs() <= 3.0 * sigma.max(1e-6),
        format!("empirical mean {emp} vs mu {mu}"),
    )
}

fn env_zero_eps() -> std::result::Result<(), String> {
    let mut spec = env_spec_basic();
    spec.eps_level = 0.0;
    spec.misspec_shape = MisspecShape::None;
    let env = Environment::new(spec, 10).map_err(|e| e.to_string())?;
    for t in 0..100 {
        let (ctx, set) = env.emit(t);
        let truth = env.truth(t, &ctx, &set, 0);
        if truth.misspec_sup_sq != 0.0 {
            return Err(format!("round {t}: misspec {}", truth.misspec_sup_sq));
        }
    }
    Ok(())
}

fn env_corrupt_budget() -> std::result::Result<(), String> {
    let mut spec = env_spec_basic();
    let c = 20;
    spec.misspec_shape = MisspecShape::CorruptedRounds { c };
    spec.eps_level = 0.3;
    let env = Environment::new(spec.clone(), 11).map_err(|e| e.to_string())?;
    let t = spec.t_horizon;
    let mut acc = 0.0;
    for round in 0..t {
        let (ctx, set) = env.emit(round);
        acc += env.truth(round, &ctx, &set, 0).misspec_sup_sq;
    }
    let eps_t = (acc / t as f64).sqrt();
    let budget = (c as f64 / t as f64).sqrt();
    ensure(
        eps_t <= budget + 1e-12,
        format!("eps_T {eps_t} > sqrt(C/T) {budget}"),
    )
}

fn env_sinusoidal_band() -> std::result::Result<(), String> {
    let spec = env_spec_basic();
    let eps = spec.eps_level;
    let env = Environment::new(spec.clone(), 12).map_err(|e| e.to_string())?;
    let t = spec.t_horizon;
    let mut acc = 0.0;
    for round in 0..t {
        let (ctx, set) = env.emit(round);
        acc += env.truth(round, &ctx, &set, 0).misspec_sup_sq;
    }
    let eps_t = (acc / t as f64).sqrt();
    ensure(
        eps_t <= eps + 1e-12 && eps_t >= 0.5 * eps,
        format!("eps_T {eps_t} outside [{}, {eps}]", 0.5 * eps),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(run_suite("bogus").is_err());
    }

    #[test]
    fn fast_suites_pass() {
        for suite in ["selectors", "oracle", "env"] {
            let report = run_suite(suite).unwrap();
            assert_eq!(report.failures, 0, "{:?}", report.lines);
        }
    }

    #[test]
    fn master_suite_passes() {
        let report = run_suite("master").unwrap();
        assert_eq!(report.failures, 0, "{:?}", report.lines);
    }
}
