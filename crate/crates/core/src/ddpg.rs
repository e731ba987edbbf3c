//! Off-policy actor-critic learner: deterministic policy with a Q-function
//! critic, slow-moving target copies of both, temporally correlated
//! exploration noise, TD-error critic updates and the sampled deterministic
//! policy gradient for the actor.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{ActionMap, Transition};
use crate::error::{Error, Result};
use crate::neural::{
    adam_step, backward, forward, forward_tape, soft_update, AdamState, Gradient, Parameters, Tape,
};

/// Ornstein-Uhlenbeck noise: mean-reverting state driven by Gaussian kicks,
/// giving temporally correlated exploration. Reset to the mean at episode
/// start.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuProcess {
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
    state: Vec<f64>,
}

impl OuProcess {
    pub fn new(mu: f64, theta: f64, sigma: f64, dim: usize) -> Self {
        Self {
            mu,
            theta,
            sigma,
            state: vec![mu; dim],
        }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = self.mu);
    }

    /// Advances one tick: `state += theta * (mu - state) + sigma * N(0, 1)`
    /// per component, returning the new state.
    pub fn sample(&mut self, rng: &mut ChaCha8Rng) -> &[f64] {
        for s in self.state.iter_mut() {
            let kick: f64 = StandardNormal.sample(rng);
            *s += self.theta * (self.mu - *s) + self.sigma * kick;
        }
        &self.state
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }
}

/// Actor/critic pair with target networks and their optimizers.
#[derive(Debug, Clone)]
pub struct DdpgLearner {
    actor: Parameters,
    critic: Parameters,
    target_actor: Parameters,
    target_critic: Parameters,
    actor_opt: AdamState,
    critic_opt: AdamState,
    gamma: f64,
    tau: f64,
    action_map: ActionMap,
    state_dim: usize,
}

impl DdpgLearner {
    /// Target networks start as exact copies of their sources.
    pub fn new(
        actor: Parameters,
        critic: Parameters,
        actor_opt: AdamState,
        critic_opt: AdamState,
        gamma: f64,
        tau: f64,
        action_map: ActionMap,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::input(format!("gamma {gamma} outside (0, 1]")));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::input(format!("tau {tau} outside (0, 1]")));
        }
        let split = critic
            .spec()
            .critic_split
            .ok_or_else(|| Error::input("critic network must have a split input"))?;
        if split.state_dim != actor.spec().input_dim || split.action_dim != actor.spec().output_dim
        {
            return Err(Error::input("actor and critic dims disagree"));
        }
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            actor_opt,
            critic_opt,
            gamma,
            tau,
            action_map,
            state_dim: split.state_dim,
        })
    }

    pub fn actor(&self) -> &Parameters {
        &self.actor
    }

    pub fn critic(&self) -> &Parameters {
        &self.critic
    }

    pub fn target_actor(&self) -> &Parameters {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &Parameters {
        &self.target_critic
    }

    pub fn action_map(&self) -> &ActionMap {
        &self.action_map
    }

    /// TD targets `y_i = r_i + gamma * Q'(s', pi'(s'))`, with the bootstrap
    /// term masked out on terminal transitions.
    pub fn compute_targets(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                if t.done {
                    return Ok(t.reward);
                }
                let raw = forward(&self.target_actor, &t.next_state)?;
                let next_action = self.action_map.affine(&raw);
                let mut input = t.next_state.clone();
                input.extend_from_slice(&next_action);
                let q = forward(&self.target_critic, &input)?[0];
                Ok(t.reward + self.gamma * q)
            })
            .collect()
    }

    /// Mean squared TD error over the batch and its gradient with respect to
    /// the critic parameters.
    pub fn critic_loss_and_gradient(
        &self,
        batch: &[Transition],
        targets: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() || batch.len() != targets.len() {
            return Err(Error::input("critic update: empty batch or target length mismatch"));
        }
        let inv_t = 1.0 / batch.len() as f64;
        let mut tape = Tape::new();
        let mut grad = Gradient::for_spec(self.critic.spec());
        let mut loss = 0.0;
        let mut input = Vec::new();
        for (t, &y) in batch.iter().zip(targets) {
            input.clear();
            input.extend_from_slice(&t.state);
            input.extend_from_slice(&t.action);
            forward_tape(&self.critic, &input, &mut tape)?;
            let q = tape.output()[0];
            let err = q - y;
            loss += err * err * inv_t;
            backward(&self.critic, &tape, &[2.0 * err * inv_t], &mut grad)?;
        }
        if !loss.is_finite() {
            return Err(Error::numeric(format!("critic loss {loss}")));
        }
        Ok((loss, grad.wrt_params))
    }

    /// One Adam step on the critic against the mean squared TD error.
    /// Returns the pre-step loss. A non-finite loss or gradient leaves the
    /// parameters untouched.
    pub fn critic_update(&mut self, batch: &[Transition]) -> Result<f64> {
        let targets = self.compute_targets(batch)?;
        let (loss, grad) = self.critic_loss_and_gradient(batch, &targets)?;
        adam_step(&mut self.critic, &grad, &mut self.critic_opt)?;
        Ok(loss)
    }

    /// Batch objective `-(1/T) sum Q(s, pi(s))` and its gradient with
    /// respect to the actor parameters; descending it is the sampled
    /// deterministic policy gradient ascent.
    pub fn actor_objective_and_gradient(&self, batch: &[Transition]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::input("actor update: empty batch"));
        }
        let mut critic_tape = Tape::new();
        let mut critic_grad = Gradient::for_spec(self.critic.spec());
        let state_dim = self.state_dim;
        let critic = &self.critic;
        let inv_t = 1.0 / batch.len() as f64;
        let mut input = Vec::new();
        actor_gradient_with_q(
            &self.actor,
            batch.iter().map(|t| t.state.as_slice()),
            &self.action_map,
            |state, action| {
                input.clear();
                input.extend_from_slice(state);
                input.extend_from_slice(action);
                forward_tape(critic, &input, &mut critic_tape)?;
                let q = critic_tape.output()[0];
                backward(critic, &critic_tape, &[-inv_t], &mut critic_grad)?;
                Ok((q, critic_grad.wrt_input[state_dim..].to_vec()))
            },
        )
    }

    /// One Adam step on the actor along the sampled policy gradient. The
    /// critic and both targets are untouched.
    pub fn actor_update(&mut self, batch: &[Transition]) -> Result<()> {
        let (_, grad) = self.actor_objective_and_gradient(batch)?;
        adam_step(&mut self.actor, &grad, &mut self.actor_opt)
    }

    /// Soft-updates both target networks toward their sources.
    pub fn update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.target_actor, &self.actor, self.tau)?;
        soft_update(&mut self.target_critic, &self.critic, self.tau)
    }
}

/// Shared machinery of the actor gradient: backpropagates
/// `dQ/d(action) * d(action)/d(raw) ` through the actor for each state,
/// where `q_and_grad` supplies Q and dQ/d(action) already scaled by the
/// objective weight. Returns the accumulated objective and actor gradient.
fn actor_gradient_with_q<'a>(
    actor: &Parameters,
    states: impl Iterator<Item = &'a [f64]>,
    map: &ActionMap,
    mut q_and_grad: impl FnMut(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let mut grad = Gradient::for_spec(actor.spec());
    let mut objective = 0.0;
    let mut count = 0usize;
    let mut upstream = Vec::new();
    for state in states {
        forward_tape(actor, state, &mut tape)?;
        let action = map.affine(tape.output());
        let (q, dq_daction) = q_and_grad(state, &action)?;
        objective -= q;
        count += 1;
        upstream.clear();
        upstream.extend(
            dq_daction
                .iter()
                .zip(map.halfwidth())
                .map(|(g, h)| g * h),
        );
        backward(actor, &tape, &upstream, &mut grad)?;
    }
    let objective = objective / count as f64;
    if !objective.is_finite() {
        return Err(Error::numeric(format!("actor objective {objective}")));
    }
    Ok((objective, grad.wrt_params))
}
