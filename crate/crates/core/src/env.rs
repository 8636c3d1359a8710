//! Synthetic contextual-bandit environments: planted linear structure with
//! controllable misspecification, changing action sets of controllable
//! dimension, bounded stochastic losses, and exact per-round truth for
//! regret accounting. Context and action-set streams are pure functions of
//! (spec, seed, t), so the adversary is oblivious by construction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{ActionSet, ActionVector};

/// Margin kept between the mean-loss range and [−1, 1] so the clip in the
/// mean definition never activates and noise stays representable.
pub const NOISE_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    FiniteArm { k: usize },
    LinearBandit,
    LinearContextual { feature_dim: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum MisspecShape {
    None,
    Sinusoidal,
    CorruptedRounds { c: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum DimSchedule {
    Constant,
    /// Alternates between `k` and `k_alt` every `period` rounds.
    Alternating { k_alt: usize, period: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ActionGen {
    FixedBasis,
    ResampleSphere { k: usize },
    LowDimSubspace {
        k: usize,
        num_actions: usize,
        schedule: DimSchedule,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    BernoulliPm1,
    UniformBand,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnvSpec {
    pub d: usize,
    pub kind: EnvKind,
    pub t_horizon: usize,
    pub eps_level: f64,
    pub misspec_shape: MisspecShape,
    pub action_gen: ActionGen,
    pub noise: NoiseKind,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.t_horizon == 0 {
            return Err(Error::Config("d and t_horizon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eps_level) {
            return Err(Error::Config(format!(
                "eps_level {} outside [0, 1]",
                self.eps_level
            )));
        }
        match &self.kind {
            EnvKind::FiniteArm { k } => {
                if *k < 2 {
                    return Err(Error::Config("finite_arm requires K >= 2".into()));
                }
                if *k != self.d {
                    return Err(Error::Config(
                        "finite_arm embeds arms as basis vectors: requires d = K".into(),
                    ));
                }
            }
            EnvKind::LinearContextual { feature_dim } => {
                if *feature_dim == 0 {
                    return Err(Error::Config("feature_dim must be positive".into()));
                }
            }
            EnvKind::LinearBandit => {}
        }
        match &self.action_gen {
            ActionGen::ResampleSphere { k } => {
                if *k < 2 {
                    return Err(Error::Config("resample_sphere requires K >= 2".into()));
                }
            }
            ActionGen::LowDimSubspace {
                k,
                num_actions,
                schedule,
            } => {
                if *k == 0 || *k > self.d {
                    return Err(Error::Config("subspace dim must lie in [1, d]".into()));
                }
                if *num_actions < k + 2 {
                    return Err(Error::Config(
                        "low_dim_subspace needs num_actions >= k + 2".into(),
                    ));
                }
                if let DimSchedule::Alternating { k_alt, period } = schedule {
                    if *k_alt == 0 || *k_alt > self.d || *period == 0 {
                        return Err(Error::Config("bad alternating schedule".into()));
                    }
                }
            }
            ActionGen::FixedBasis => {}
        }
        if let MisspecShape::CorruptedRounds { c } = &self.misspec_shape {
            if *c > self.t_horizon {
                return Err(Error::Config("corrupted rounds exceed horizon".into()));
            }
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        match self.kind {
            EnvKind::LinearContextual { feature_dim } => feature_dim,
            _ => 0,
        }
    }
}

/// Per-round ground truth for regret and misspecification accounting.
#[derive(Debug, Clone)]
pub struct RoundTruth {
    pub best_mean_loss: f64,
    pub played_mean_loss: f64,
    pub misspec_sup_sq: f64,
}

const TAG_PLANT: u64 = 1;
const TAG_EMIT: u64 = 2;
const TAG_CORRUPT: u64 = 3;

#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvSpec,
    seed: u64,
    /// Fixed parameter: f* (context-free kinds) as a d-vector.
    f_star: DVector<f64>,
    /// Θ* for linear_contextual, mapping features to the d-dim parameter.
    theta_star: Option<DMatrix<f64>>,
    /// Misspecification carrier directions.
    v_dir: DVector<f64>,
    u_dir: DVector<f64>,
    /// Fixed orthonormal basis for low_dim_subspace, d × d columns (the
    /// schedule picks how many leading columns each round uses).
    subspace: Option<DMatrix<f64>>,
    corrupted: HashSet<usize>,
}

impl Environment {
    pub fn new(spec: EnvSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let d = spec.d;
        let mut rng = RngStream::derive(seed, &[TAG_PLANT]);
        let scale = 1.0 - spec.eps_level - NOISE_MARGIN;
        let scale = scale.max(0.0);
        let f_star = DVector::from_vec(rng.unit_sphere(d)) * scale;
        let theta_star = match spec.kind {
            EnvKind::LinearContextual { feature_dim } => {
                let mut m = DMatrix::from_fn(d, feature_dim, |_, _| rng.normal());
                let sv = m.clone().svd(false, false).singular_values.max();
                if sv > 0.0 {
                    m *= scale / sv;
                }
                Some(m)
            }
            _ => None,
        };
        let v_dir = DVector::from_vec(rng.unit_sphere(d));
        let u_dim = spec.feature_dim().max(1);
        let u_dir = DVector::from_vec(rng.unit_sphere(u_dim));
        let subspace = match spec.action_gen {
            ActionGen::LowDimSubspace { .. } => {
                // Orthonormal columns from a QR of a random Gaussian matrix.
                let g = DMatrix::from_fn(d, d, |_, _| rng.normal());
                Some(g.qr().q())
            }
            _ => None,
        };
        let corrupted = match spec.misspec_shape {
            MisspecShape::CorruptedRounds { c } => {
                let mut pick = RngStream::derive(seed, &[TAG_CORRUPT]);
                let mut idx: Vec<usize> = (0..spec.t_horizon).collect();
                for i in 0..c.min(idx.len()) {
                    let j = i + pick.index(idx.len() - i);
                    idx.swap(i, j);
                }
                idx.into_iter().take(c).collect()
            }
            _ => HashSet::new(),
        };
        Ok(Self {
            spec,
            seed,
            f_star,
            theta_star,
            v_dir,
            u_dir,
            subspace,
            corrupted,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Context and action set for round `t` (0-based). Pure in (seed, t).
    pub fn emit(&self, t: usize) -> (Vec<f64>, ActionSet) {
        let mut rng = RngStream::derive(self.seed, &[TAG_EMIT, t as u64]);
        let context = match self.spec.kind {
            EnvKind::LinearContextual { feature_dim } => rng.unit_sphere(feature_dim),
            _ => Vec::new(),
        };
        let set = match &self.spec.action_gen {
            ActionGen::FixedBasis => ActionSet::standard_basis(self.spec.d),
            ActionGen::ResampleSphere { k } => ActionSet::new(
                (0..*k)
                    .map(|_| ActionVector::new(rng.unit_sphere(self.spec.d)).unwrap())
                    .collect(),
            )
            .unwrap(),
            ActionGen::LowDimSubspace {
                k,
                num_actions,
                schedule,
            } => {
                let dim_t = match schedule {
                    DimSchedule::Constant => *k,
                    DimSchedule::Alternating { k_alt, period } => {
                        if (t / period) % 2 == 0 {
                            *k
                        } else {
                            *k_alt
                        }
                    }
                };
                let basis = self.subspace.as_ref().unwrap().columns(0, dim_t);
                ActionSet::new(
                    (0..*num_actions)
                        .map(|_| {
                            let z = DVector::from_vec(rng.unit_sphere(dim_t));
                            ActionVector::new((&basis * z).iter().cloned().collect()).unwrap()
                        })
                        .collect(),
                )
                .unwrap()
            }
        };
        (context, set)
    }

    fn param_for(&self, context: &[f64]) -> DVector<f64> {
        match &self.theta_star {
            Some(m) => m * DVector::from_column_slice(context),
            None => self.f_star.clone(),
        }
    }

    fn eps_at(&self, t: usize) -> f64 {
        match self.spec.misspec_shape {
            MisspecShape::None => 0.0,
            MisspecShape::Sinusoidal => self.spec.eps_level,
            MisspecShape::CorruptedRounds { .. } => {
                if self.corrupted.contains(&t) {
                    self.spec.eps_level
                } else {
                    0.0
                }
            }
        }
    }

    fn g_fn(&self, a: &DVector<f64>, context: &[f64]) -> f64 {
        let cx = if context.is_empty() {
            0.0
        } else {
            self.u_dir.dot(&DVector::from_column_slice(context))
        };
        (7.0 * self.v_dir.dot(a) + cx).sin()
    }

    /// Conditional mean loss μ(a, x_t).
    pub fn mean_loss(&self, t: usize, context: &[f64], a: &DVector<f64>) -> f64 {
        let f = self.param_for(context);
        let raw = a.dot(&f) + self.eps_at(t) * self.g_fn(a, context);
        raw.clamp(-1.0 + NOISE_MARGIN, 1.0 - NOISE_MARGIN)
    }

    /// One stochastic loss draw for playing `a` at round `t`.
    pub fn loss(&self, t: usize, context: &[f64], a: &DVector<f64>, rng: &mut RngStream) -> f64 {
        let mu = self.mean_loss(t, context, a);
        match self.spec.noise {
            NoiseKind::BernoulliPm1 => {
                if rng.bernoulli((1.0 + mu) / 2.0) {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseKind::UniformBand => {
                let c = 1.0 - mu.abs();
                rng.uniform_in(mu - c, mu + c)
            }
        }
    }

    /// Ground truth for the round given the played action index.
    pub fn truth(&self, t: usize, context: &[f64], set: &ActionSet, played: usize) -> RoundTruth {
        let f = self.param_for(context);
        let mut best = f64::INFINITY;
        let mut sup_sq = 0.0f64;
        for i in 0..set.len() {
            let a = set.get(i).coords();
            let mu = self.mean_loss(t, context, a);
            if mu < best {
                best = mu;
            }
            let gap = a.dot(&f) - mu;
            sup_sq = sup_sq.max(gap * gap);
        }
        let played_mu = self.mean_loss(t, context, set.get(played).coords());
        RoundTruth {
            best_mean_loss: best,
            played_mean_loss: played_mu,
            misspec_sup_sq: sup_sq,
        }
    }
}
