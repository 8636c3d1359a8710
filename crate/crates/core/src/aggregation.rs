//! Corral aggregation: the hedged Tsallis-INF master selecting among
//! SquareCB.Lin+ bases tuned on a geometric misspecification grid, plus the
//! dimension-adaptive doubling wrapper.

use crate::bandits::BasePlus;
use crate::error::Result;
use crate::master::HedgedFtrlState;
use crate::oracle::RegressionOracle;
use crate::rng::RngStream;
use crate::types::ActionSet;

const TAG_MASTER: u64 = 10;
const TAG_BASE: u64 = 11;
const TAG_EPISODE: u64 = 12;

#[derive(Debug, Clone)]
pub struct CorralConfig {
    pub t_horizon: usize,
    /// Dimension the schedules are tuned for (ambient by default; the
    /// doubling wrapper passes its current guess).
    pub d: usize,
    pub reg_sq: f64,
    pub alpha: f64,
    pub r_scale: f64,
}

impl CorralConfig {
    pub fn new(t_horizon: usize, d: usize) -> Self {
        Self {
            t_horizon,
            d,
            reg_sq: crate::bandits::default_reg_sq(d, t_horizon),
            alpha: 0.5,
            r_scale: 1.5,
        }
    }

    /// M = ⌊ln T⌋, at least 1.
    pub fn num_bases(&self) -> usize {
        ((self.t_horizon as f64).ln().floor() as usize).max(1)
    }

    /// ε'_m = e^{−m} for m = 1..M.
    pub fn eps_grid(&self) -> Vec<f64> {
        (1..=self.num_bases()).map(|m| (-(m as f64)).exp()).collect()
    }

    /// R = (3/2)·√(d·T·Reg_Sq(T)).
    pub fn hedge_r(&self) -> f64 {
        self.r_scale * (self.d as f64 * self.t_horizon as f64 * self.reg_sq).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CorralRound {
    pub base: usize,
    pub q: f64,
    pub rho: f64,
    pub gamma: f64,
    pub iterations: usize,
}

/// One Corral aggregate: master plus M bases with private rng streams.
pub struct Corral<O: RegressionOracle> {
    config: CorralConfig,
    master: HedgedFtrlState,
    bases: Vec<BasePlus<O>>,
    master_rng: RngStream,
    base_rngs: Vec<RngStream>,
    last: Option<CorralRound>,
}

impl<O: RegressionOracle> Corral<O> {
    pub fn new(config: CorralConfig, seed: u64, oracle_factory: impl Fn() -> O) -> Self {
        let m = config.num_bases();
        let eta = HedgedFtrlState::default_eta(config.t_horizon);
        let master = HedgedFtrlState::new(m, config.alpha, config.hedge_r(), eta);
        let bases = config
            .eps_grid()
            .into_iter()
            .enumerate()
            .map(|(i, eps)| {
                BasePlus::new(
                    i,
                    eps,
                    config.d,
                    config.t_horizon,
                    config.reg_sq,
                    oracle_factory(),
                )
            })
            .collect();
        let base_rngs = (0..m)
            .map(|i| RngStream::derive(seed, &[TAG_BASE, i as u64]))
            .collect();
        Self {
            config,
            master,
            bases,
            master_rng: RngStream::derive(seed, &[TAG_MASTER]),
            base_rngs,
            last: None,
        }
    }

    pub fn config(&self) -> &CorralConfig {
        &self.config
    }

    pub fn master(&self) -> &HedgedFtrlState {
        &self.master
    }

    pub fn bases(&self) -> &[BasePlus<O>] {
        &self.bases
    }

    pub fn last_round(&self) -> Option<&CorralRound> {
        self.last.as_ref()
    }

    pub fn total_cap_hits(&self) -> usize {
        self.bases.iter().map(|b| b.cap_hits()).sum()
    }

    pub fn choose(&mut self, context: &[f64], set: &ActionSet) -> Result<usize> {
        let (m, q, rho) = self.master.sample(&mut self.master_rng);
        let idx = self.bases[m].choose(context, set, q, rho, &mut self.base_rngs[m])?;
        self.last = Some(CorralRound {
            base: m,
            q,
            rho,
            gamma: self.bases[m].gamma_last(),
            iterations: self.bases[m].last_iterations(),
        });
        Ok(idx)
    }

    pub fn observe(&mut self, loss: f64) -> Result<()> {
        let round = self.last.expect("observe without choose");
        self.bases[round.base].observe(loss, &mut self.base_rngs[round.base]);
        self.master.update(round.base, loss + 1.0)
    }
}

/// Doubling wrapper over Corral: tracks the running sum of action-set
/// dimensions per episode and restarts with a doubled budget (and doubled
/// dimension guess) once the budget is exceeded. The overflowing round is
/// served by the fresh episode.
pub struct DimensionAdaptive<O: RegressionOracle, F: Fn() -> O> {
    t_horizon: usize,
    d_max: usize,
    seed: u64,
    factory: F,
    reg_scale: f64,
    budget: usize,
    episode_dim_sum: usize,
    episode: usize,
    tau: Vec<usize>,
    inner: Corral<O>,
}

impl<O: RegressionOracle, F: Fn() -> O> DimensionAdaptive<O, F> {
    pub fn new(t_horizon: usize, d_max: usize, seed: u64, factory: F) -> Self {
        Self::with_reg_scale(t_horizon, d_max, seed, 1.0, factory)
    }

    /// Like `new`, but multiplies each episode's regression budget by
    /// `reg_scale` (the configurable leading constant on `Reg_Sq`).
    pub fn with_reg_scale(
        t_horizon: usize,
        d_max: usize,
        seed: u64,
        reg_scale: f64,
        factory: F,
    ) -> Self {
        assert!(reg_scale > 0.0);
        let inner = Self::fresh_inner(t_horizon, d_max, seed, 0, t_horizon, reg_scale, &factory);
        Self {
            t_horizon,
            d_max,
            seed,
            factory,
            reg_scale,
            budget: t_horizon,
            episode_dim_sum: 0,
            episode: 0,
            tau: vec![0],
            inner,
        }
    }

    fn d_guess(budget: usize, t_horizon: usize, d_max: usize) -> usize {
        (budget / t_horizon).clamp(1, d_max)
    }

    fn fresh_inner(
        t_horizon: usize,
        d_max: usize,
        seed: u64,
        episode: usize,
        budget: usize,
        reg_scale: f64,
        factory: &F,
    ) -> Corral<O> {
        let d = Self::d_guess(budget, t_horizon, d_max);
        let mut config = CorralConfig::new(t_horizon, d);
        config.reg_sq *= reg_scale;
        Corral::new(
            config,
            crate::rng::mix_seed(seed, &[TAG_EPISODE, episode as u64]),
            factory,
        )
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn episode_dim_sum(&self) -> usize {
        self.episode_dim_sum
    }

    pub fn restart_times(&self) -> &[usize] {
        &self.tau
    }

    pub fn inner(&self) -> &Corral<O> {
        &self.inner
    }

    pub fn choose(&mut self, t: usize, context: &[f64], set: &ActionSet) -> Result<usize> {
        let dim = set.affine_dim().max(1);
        if self.episode_dim_sum + dim > self.budget {
            self.episode += 1;
            self.budget *= 2;
            self.tau.push(t);
            self.episode_dim_sum = 0;
            self.inner = Self::fresh_inner(
                self.t_horizon,
                self.d_max,
                self.seed,
                self.episode,
                self.budget,
                self.reg_scale,
                &self.factory,
            );
        }
        self.episode_dim_sum += dim;
        self.inner.choose(context, set)
    }

    pub fn observe(&mut self, loss: f64) -> Result<()> {
        self.inner.observe(loss)
    }
}
