//! Delayed-reward wrapper: identical dynamics, but the reward is withheld
//! until the terminal step, where the episode's accumulated total is paid
//! out at once. Episode-total reward is preserved exactly, so fitness-based
//! learners see the same problem while temporal-difference learners face a
//! long credit-assignment gap.

use rand_chacha::ChaCha8Rng;

use crate::env::{EnvSpec, Environment, StepResult};
use crate::error::Result;

pub struct SparseReward {
    inner: Box<dyn Environment>,
    accumulated: f64,
}

impl SparseReward {
    pub fn new(inner: impl Environment + 'static) -> Self {
        Self {
            inner: Box::new(inner),
            accumulated: 0.0,
        }
    }
}

/// Wraps an episodic environment so reward is disbursed only at episode end.
pub fn wrap_sparse(inner: impl Environment + 'static) -> SparseReward {
    SparseReward::new(inner)
}

impl Environment for SparseReward {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.accumulated = 0.0;
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let mut result = self.inner.step(action)?;
        self.accumulated += result.reward;
        result.reward = if result.done { self.accumulated } else { 0.0 };
        Ok(result)
    }
}
