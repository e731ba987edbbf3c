//! Run configuration: every hyperparameter in one validated record, with a
//! TOML file format. An empty file yields the full default configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{MutationParams, SelectionMode};
use crate::neural::ClipMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuParams {
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        Self {
            mu: 0.0,
            theta: 0.15,
            sigma: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    pub clip_mode: ClipMode,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 10.0,
            clip_mode: ClipMode::GlobalNorm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub actor_hidden: Vec<usize>,
    /// Width of each of the critic's two first-layer branches.
    pub critic_sub_units: usize,
    pub critic_tail: Vec<usize>,
    pub layer_norm: bool,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 128],
            critic_sub_units: 200,
            critic_tail: vec![300],
            layer_norm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErlConfig {
    /// Environment name: `pendulum` or `sparse-pendulum`.
    pub env: String,
    pub seed: u64,
    /// Population size.
    pub k: usize,
    /// Elite fraction.
    pub psi: f64,
    /// Fitness-evaluation episodes per individual.
    pub xi: usize,
    /// Synchronization period, in generations.
    pub omega: u64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub selection_mode: SelectionMode,
    pub tournament_size: usize,
    /// Critic+actor update pairs per environment step collected.
    pub update_ratio: f64,
    /// When set, exactly one update pair runs per generation regardless of
    /// `update_ratio`.
    pub literal_single_update: bool,
    pub step_budget: u64,
    /// Evaluate population members on parallel workers. Results are merged
    /// in member order, so output is identical either way.
    pub parallel_eval: bool,
    pub mutation: MutationParams,
    pub ou: OuParams,
    pub adam: AdamParams,
    pub network: NetworkParams,
}

impl Default for ErlConfig {
    fn default() -> Self {
        Self {
            env: "pendulum".to_string(),
            seed: 0,
            k: 10,
            psi: 0.1,
            xi: 1,
            omega: 10,
            gamma: 0.99,
            tau: 1e-3,
            batch_size: 128,
            buffer_capacity: 100_000,
            actor_lr: 5e-5,
            critic_lr: 5e-4,
            selection_mode: SelectionMode::Tournament,
            tournament_size: 3,
            update_ratio: 1.0,
            literal_single_update: false,
            step_budget: 300_000,
            parallel_eval: false,
            mutation: MutationParams::default(),
            ou: OuParams::default(),
            adam: AdamParams::default(),
            network: NetworkParams::default(),
        }
    }
}

impl ErlConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.env.as_str(), "pendulum" | "sparse-pendulum") {
            return Err(Error::config("env", format!("unknown environment `{}`", self.env)));
        }
        if self.k < 2 {
            return Err(Error::config("k", format!("{} must be >= 2", self.k)));
        }
        if !(self.psi > 0.0 && self.psi < 1.0) {
            return Err(Error::config("psi", format!("{} outside (0, 1)", self.psi)));
        }
        if self.xi < 1 {
            return Err(Error::config("xi", "must be >= 1"));
        }
        if self.omega < 1 {
            return Err(Error::config("omega", "must be >= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma", format!("{} outside (0, 1]", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("tau", format!("{} outside (0, 1]", self.tau)));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if self.buffer_capacity < 1 {
            return Err(Error::config("buffer_capacity", "must be >= 1"));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::config(
                "batch_size",
                format!(
                    "{} exceeds buffer_capacity {}",
                    self.batch_size, self.buffer_capacity
                ),
            ));
        }
        if !(self.actor_lr > 0.0) {
            return Err(Error::config("actor_lr", "must be > 0"));
        }
        if !(self.critic_lr > 0.0) {
            return Err(Error::config("critic_lr", "must be > 0"));
        }
        if self.tournament_size < 1 {
            return Err(Error::config("tournament_size", "must be >= 1"));
        }
        if !(self.update_ratio >= 0.0 && self.update_ratio.is_finite()) {
            return Err(Error::config("update_ratio", "must be finite and >= 0"));
        }
        if self.step_budget < 1 {
            return Err(Error::config("step_budget", "must be >= 1"));
        }
        self.mutation.validate()?;
        if !(self.ou.theta >= 0.0 && self.ou.theta <= 1.0) {
            return Err(Error::config("ou.theta", format!("{} outside [0, 1]", self.ou.theta)));
        }
        if !(self.ou.sigma >= 0.0) {
            return Err(Error::config("ou.sigma", "must be >= 0"));
        }
        if !self.ou.mu.is_finite() {
            return Err(Error::config("ou.mu", "must be finite"));
        }
        for (key, b) in [("adam.beta1", self.adam.beta1), ("adam.beta2", self.adam.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(key, format!("{b} outside [0, 1)")));
            }
        }
        if !(self.adam.epsilon > 0.0) {
            return Err(Error::config("adam.epsilon", "must be > 0"));
        }
        if !(self.adam.clip_norm > 0.0) {
            return Err(Error::config("adam.clip_norm", "must be > 0"));
        }
        if self.network.actor_hidden.iter().any(|&d| d == 0) {
            return Err(Error::config("network.actor_hidden", "layer widths must be >= 1"));
        }
        if self.network.critic_sub_units == 0 {
            return Err(Error::config("network.critic_sub_units", "must be >= 1"));
        }
        if self.network.critic_tail.iter().any(|&d| d == 0) {
            return Err(Error::config("network.critic_tail", "layer widths must be >= 1"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ErlConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(format!("config serialize: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_full_defaults() {
        let config = ErlConfig::from_toml_str("").unwrap();
        assert_eq!(config, ErlConfig::default());
        assert_eq!(config.k, 10);
        assert_eq!(config.batch_size, 128);
        assert_eq!(config.gamma, 0.99);
        assert_eq!(config.tau, 1e-3);
        assert_eq!(config.actor_lr, 5e-5);
        assert_eq!(config.critic_lr, 5e-4);
        assert_eq!(config.mutation.mut_prob, 0.9);
        assert_eq!(config.mutation.mut_strength, 0.1);
        assert_eq!(config.mutation.mut_frac, 0.1);
        assert_eq!(config.mutation.supermut_prob, 0.05);
        assert_eq!(config.mutation.reset_prob, 0.05);
        assert_eq!(config.network.actor_hidden, vec![128, 128]);
        assert_eq!(config.network.critic_sub_units, 200);
        assert_eq!(config.network.critic_tail, vec![300]);
    }

    #[test]
    fn out_of_range_psi_is_named() {
        let err = ErlConfig::from_toml_str("psi = 1.5").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "psi"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ErlConfig::from_toml_str("unknown_knob = 3").is_err());
        assert!(ErlConfig::from_toml_str("[mutation]\nbogus = 1").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let mut config = ErlConfig::default();
        config.env = "sparse-pendulum".into();
        config.k = 7;
        config.psi = 0.25;
        config.update_ratio = 0.5;
        config.network.actor_hidden = vec![32, 16];
        let text = config.to_toml_string().unwrap();
        let back = ErlConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        let config = ErlConfig::default();
        config.save(&path).unwrap();
        assert_eq!(ErlConfig::load(&path).unwrap(), config);
    }
}
