//! Experiment configuration: a human-editable TOML schema plus the two
//! in-repo presets reproducing the paper-style sweeps.

use std::path::PathBuf;

use difftd::env::{
    build_gridworld, manhattan_epsilon_greedy_policy, uniform_random_policy, GridworldSpec,
};
use difftd::learner::LearningRateSchedule;
use difftd::mdp::{Policy, TabularMdp};
use difftd::{Error, Result};
use serde::{Deserialize, Serialize};

/// Environment source: an in-config gridworld or an MDP file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Gridworld {
        width: usize,
        height: usize,
        #[serde(default = "default_goal_reward")]
        goal_reward: f64,
    },
    File { path: PathBuf },
}

fn default_goal_reward() -> f64 {
    1.0
}

/// Policy source. `EpsilonGreedy` is only meaningful for gridworld
/// environments (the greedy base navigates toward the goal);
/// `SameAsTarget` is only valid as a behavior policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Uniform,
    EpsilonGreedy { epsilon: f64 },
    File { path: PathBuf },
    SameAsTarget,
}

/// One experiment: an (n, η) grid of seeded differential-TD runs on a
/// fixed environment with a fixed target/behavior pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub target_policy: PolicySpec,
    pub behavior_policy: PolicySpec,
    pub schedule: LearningRateSchedule,
    pub n_values: Vec<usize>,
    pub eta_values: Vec<f64>,
    pub steps: u64,
    pub seeds: u64,
    #[serde(default = "default_probe_every")]
    pub probe_every: u64,
}

fn default_probe_every() -> u64 {
    100
}

/// Ready-to-run materialization of a config.
pub struct ResolvedExperiment {
    pub mdp: TabularMdp,
    pub target: Policy,
    pub behavior: Policy,
}

pub const PRESET_FIG1: &str = include_str!("../presets/fig1.toml");
pub const PRESET_FIG2: &str = include_str!("../presets/fig2.toml");

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The named in-repo presets: `fig1` sweeps η at fixed n = 3, `fig2`
    /// sweeps n at fixed η = 0.1, both on the 5×5 gridworld with a random
    /// behavior policy and an ε-greedy target.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig1" => Self::from_toml(PRESET_FIG1),
            "fig2" => Self::from_toml(PRESET_FIG2),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (available: fig1, fig2)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be ≥ 1".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be ≥ 1".into()));
        }
        if self.probe_every == 0 {
            return Err(Error::Config("probe_every must be ≥ 1".into()));
        }
        if self.n_values.is_empty() || self.eta_values.is_empty() {
            return Err(Error::Config("n_values and eta_values must be nonempty".into()));
        }
        if self.n_values.iter().any(|&n| n == 0) {
            return Err(Error::Config("every n must be ≥ 1".into()));
        }
        if self.eta_values.iter().any(|&eta| eta <= 0.0 || !eta.is_finite()) {
            return Err(Error::Config("every eta must be positive".into()));
        }
        self.schedule.validate()?;
        if let EnvSpec::Gridworld { width, height, goal_reward } = self.env {
            if width < 2 || height < 2 {
                return Err(Error::Config("gridworld must be at least 2×2".into()));
            }
            if !goal_reward.is_finite() {
                return Err(Error::Config("goal_reward must be finite".into()));
            }
        }
        if self.target_policy == PolicySpec::SameAsTarget {
            return Err(Error::Config("target_policy cannot be same_as_target".into()));
        }
        if matches!(
            (&self.env, &self.target_policy),
            (EnvSpec::File { .. }, PolicySpec::EpsilonGreedy { .. })
        ) || matches!(
            (&self.env, &self.behavior_policy),
            (EnvSpec::File { .. }, PolicySpec::EpsilonGreedy { .. })
        ) {
            return Err(Error::Config(
                "epsilon_greedy policies need a gridworld env (the greedy base is grid navigation)"
                    .into(),
            ));
        }
        if let PolicySpec::EpsilonGreedy { epsilon } = self.target_policy {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::Config(format!("epsilon {epsilon} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Builds the MDP and both policies.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        let (mdp, grid) = match &self.env {
            EnvSpec::Gridworld { width, height, goal_reward } => {
                let mut spec = GridworldSpec::new(*width, *height);
                spec.goal_reward = *goal_reward;
                (build_gridworld(&spec)?, Some(spec))
            }
            EnvSpec::File { path } => (TabularMdp::load(path)?, None),
        };
        let target = self.resolve_policy(&self.target_policy, &mdp, grid.as_ref(), None)?;
        let behavior =
            self.resolve_policy(&self.behavior_policy, &mdp, grid.as_ref(), Some(&target))?;
        Ok(ResolvedExperiment { mdp, target, behavior })
    }

    fn resolve_policy(
        &self,
        spec: &PolicySpec,
        mdp: &TabularMdp,
        grid: Option<&GridworldSpec>,
        target: Option<&Policy>,
    ) -> Result<Policy> {
        match spec {
            PolicySpec::Uniform => Ok(uniform_random_policy(mdp)),
            PolicySpec::EpsilonGreedy { epsilon } => {
                let grid = grid.ok_or_else(|| {
                    Error::Config("epsilon_greedy policy needs a gridworld env".into())
                })?;
                manhattan_epsilon_greedy_policy(grid, *epsilon)
            }
            PolicySpec::File { path } => Policy::load(path),
            PolicySpec::SameAsTarget => target
                .map(Clone::clone)
                .ok_or_else(|| Error::Config("same_as_target is only valid as behavior".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_match_the_protocol() {
        let fig1 = ExperimentConfig::preset("fig1").unwrap();
        assert_eq!(fig1.n_values, vec![3]);
        assert_eq!(fig1.eta_values, vec![0.1, 0.5, 1.0, 2.0]);
        assert_eq!(fig1.steps, 100_000);
        assert_eq!(fig1.seeds, 30);
        assert_eq!(fig1.schedule, LearningRateSchedule::Constant { c1: 0.01 });

        let fig2 = ExperimentConfig::preset("fig2").unwrap();
        assert_eq!(fig2.n_values, vec![1, 2, 3, 4]);
        assert_eq!(fig2.eta_values, vec![0.1]);

        assert!(ExperimentConfig::preset("fig3").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let config = ExperimentConfig::preset("fig1").unwrap();
        let back = ExperimentConfig::from_toml(&config.to_toml()).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut config = ExperimentConfig::preset("fig1").unwrap();
        config.eta_values = vec![0.0];
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::preset("fig1").unwrap();
        config.seeds = 0;
        assert!(config.validate().is_err());
        let mut config = ExperimentConfig::preset("fig1").unwrap();
        config.target_policy = PolicySpec::SameAsTarget;
        assert!(config.validate().is_err());
    }

    #[test]
    fn resolve_builds_gridworld_and_policies() {
        let resolved = ExperimentConfig::preset("fig1").unwrap().resolve().unwrap();
        assert_eq!(resolved.mdp.num_states(), 25);
        assert!((resolved.target.prob(0, 1) - 0.475).abs() < 1e-12); // down/right split
        assert_eq!(resolved.behavior.prob(0, 0), 0.25);
    }
}
