//! Experiment configuration: environment spec plus algorithm choice, seeds,
//! and output naming. Parsed from a single JSON document.

use serde::{Deserialize, Serialize};

use crate::bandits::{default_reg_sq, tuned_gamma};
use crate::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SelectorChoice {
    #[default]
    Igw,
    LogBarrier,
}

/// Which learner to run, with the fixed-rate baselines taking either an
/// explicit γ or a known misspecification level to tune γ from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Squarecb {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        eps_known: Option<f64>,
        #[serde(default)]
        selector: SelectorChoice,
    },
    SquarecbLin {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        eps_known: Option<f64>,
    },
    Corral,
    CorralDimAdaptive,
    TsallisMab {
        #[serde(default)]
        eta: Option<f64>,
    },
}

impl AlgorithmSpec {
    pub fn slug(&self) -> &'static str {
        match self {
            AlgorithmSpec::Squarecb { .. } => "squarecb",
            AlgorithmSpec::SquarecbLin { .. } => "squarecb_lin",
            AlgorithmSpec::Corral => "corral",
            AlgorithmSpec::CorralDimAdaptive => "corral_dim_adaptive",
            AlgorithmSpec::TsallisMab { .. } => "tsallis_mab",
        }
    }

    /// Resolves the fixed rate for the baselines: an explicit γ wins,
    /// otherwise γ is tuned from the declared misspecification level
    /// (defaulting to the well-specified tuning).
    pub fn resolve_gamma(&self, env: &EnvSpec) -> Option<f64> {
        let (gamma, eps_known) = match self {
            AlgorithmSpec::Squarecb {
                gamma, eps_known, ..
            }
            | AlgorithmSpec::SquarecbLin { gamma, eps_known } => (*gamma, *eps_known),
            _ => return None,
        };
        Some(gamma.unwrap_or_else(|| {
            let reg = default_reg_sq(env.d, env.t_horizon);
            tuned_gamma(env.d, env.t_horizon, reg, eps_known.unwrap_or(0.0))
        }))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithm: AlgorithmSpec,
    pub seeds: Vec<u64>,
    /// Basename for the output files; defaults to the algorithm slug.
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn name(&self) -> String {
        self.output
            .clone()
            .unwrap_or_else(|| self.algorithm.slug().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds list must be non-empty".into()));
        }
        if self.env.t_horizon < 10 {
            return Err(Error::Config("horizon T must be at least 10".into()));
        }
        match &self.algorithm {
            AlgorithmSpec::Squarecb { .. } | AlgorithmSpec::TsallisMab { .. } => {
                if !matches!(self.env.kind, EnvKind::FiniteArm { .. }) {
                    return Err(Error::Config(format!(
                        "{} runs over finite arms only",
                        self.algorithm.slug()
                    )));
                }
            }
            _ => {}
        }
        if let Some(g) = self.algorithm.resolve_gamma(&self.env) {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("resolved gamma {g} invalid")));
            }
        }
        if let AlgorithmSpec::TsallisMab { eta: Some(e) } = &self.algorithm {
            if !(*e > 0.0 && e.is_finite()) {
                return Err(Error::Config(format!("tsallis eta {e} invalid")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionGen, MisspecShape, NoiseKind};

    fn base_env() -> EnvSpec {
        EnvSpec {
            d: 3,
            kind: EnvKind::LinearBandit,
            t_horizon: 100,
            eps_level: 0.0,
            misspec_shape: MisspecShape::None,
            action_gen: ActionGen::ResampleSphere { k: 5 },
            noise: NoiseKind::UniformBand,
        }
    }

    #[test]
    fn parses_round_trip() {
        let cfg = ExperimentConfig {
            env: base_env(),
            algorithm: AlgorithmSpec::Corral,
            seeds: vec![1, 2],
            output: None,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.name(), "corral");
    }

    #[test]
    fn rejects_empty_seeds_and_short_horizon() {
        let mut cfg = ExperimentConfig {
            env: base_env(),
            algorithm: AlgorithmSpec::Corral,
            seeds: vec![],
            output: None,
        };
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![1];
        cfg.env.t_horizon = 5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn squarecb_requires_finite_arms() {
        let cfg = ExperimentConfig {
            env: base_env(),
            algorithm: AlgorithmSpec::Squarecb {
                gamma: Some(10.0),
                eps_known: None,
                selector: SelectorChoice::Igw,
            },
            seeds: vec![1],
            output: None,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn gamma_tuning_falls_back_to_well_specified() {
        let env = base_env();
        let algo = AlgorithmSpec::SquarecbLin {
            gamma: None,
            eps_known: None,
        };
        let g = algo.resolve_gamma(&env).unwrap();
        let reg = default_reg_sq(env.d, env.t_horizon);
        assert!((g - tuned_gamma(env.d, env.t_horizon, reg, 0.0)).abs() < 1e-12);
    }
}
