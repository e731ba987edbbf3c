//! Episodic continuous-control environments behind a uniform interface.

mod pendulum;
mod sparse;

pub use pendulum::{angle_normalize, Pendulum};
pub use sparse::{wrap_sparse, SparseReward};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static shape and bounds of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 {
            return Err(Error::input("env dims must be >= 1"));
        }
        if self.action_low.len() != self.action_dim || self.action_high.len() != self.action_dim {
            return Err(Error::input("action bounds must match action_dim"));
        }
        if self
            .action_low
            .iter()
            .zip(&self.action_high)
            .any(|(lo, hi)| !(lo < hi))
        {
            return Err(Error::input("action_low must be elementwise below action_high"));
        }
        if self.max_episode_steps == 0 {
            return Err(Error::input("max_episode_steps must be >= 1"));
        }
        Ok(())
    }
}

/// Result of one environment tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// One experience tuple; the unit stored in the replay buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// An episodic environment. Instances are single-owner state machines:
/// `reset` starts an episode, `step` advances it, and stepping a finished
/// episode is a usage error.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode and returns the initial state. Randomness comes
    /// only from the provided stream.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Advances one tick. The caller is responsible for clipping the action
    /// into the spec's bounds.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

/// Builds the environment registered under `name`.
pub fn env_by_name(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "pendulum" => Ok(Box::new(Pendulum::new())),
        "sparse-pendulum" => Ok(Box::new(SparseReward::new(Pendulum::new()))),
        other => Err(Error::input(format!(
            "unknown environment `{other}` (expected `pendulum` or `sparse-pendulum`)"
        ))),
    }
}

/// Affine map between the policy's [-1, 1] action cube and an environment's
/// action box.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMap {
    center: Vec<f64>,
    halfwidth: Vec<f64>,
}

impl ActionMap {
    pub fn for_spec(spec: &EnvSpec) -> Self {
        let center = spec
            .action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect();
        let halfwidth = spec
            .action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .collect();
        Self { center, halfwidth }
    }

    /// Maps a normalized action (clamped into [-1, 1] first) to env units.
    pub fn to_env(&self, normalized: &[f64]) -> Vec<f64> {
        normalized
            .iter()
            .zip(self.center.iter().zip(&self.halfwidth))
            .map(|(u, (c, h))| c + h * u.clamp(-1.0, 1.0))
            .collect()
    }

    /// The unclamped affine map, for inputs already inside [-1, 1] (tanh
    /// outputs). Differentiable everywhere with Jacobian diag(halfwidth).
    pub fn affine(&self, normalized: &[f64]) -> Vec<f64> {
        normalized
            .iter()
            .zip(self.center.iter().zip(&self.halfwidth))
            .map(|(u, (c, h))| c + h * u)
            .collect()
    }

    /// Jacobian diagonal of the normalized-to-env map.
    pub fn halfwidth(&self) -> &[f64] {
        &self.halfwidth
    }
}
