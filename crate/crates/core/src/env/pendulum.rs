//! Pendulum swing-up, the dense-reward task.
//!
//! State is (theta, theta_dot) with theta = 0 pointing up; the observation
//! is (cos theta, sin theta, theta_dot). A scalar torque in [-2, 2] drives
//! the pendulum; the reward penalizes angle from upright, angular speed and
//! control effort, evaluated on the state in which the action was taken.
//! Episodes run a fixed 200 ticks with no early termination.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const EPISODE_STEPS: usize = 200;

/// Wraps an angle into [-pi, pi].
pub fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    steps: usize,
    in_episode: bool,
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                state_dim: 3,
                action_dim: 1,
                action_low: vec![-MAX_TORQUE],
                action_high: vec![MAX_TORQUE],
                max_episode_steps: EPISODE_STEPS,
            },
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            in_episode: false,
        }
    }

    /// Places the pendulum in a specific pose mid-episode. Intended for
    /// probing the dynamics; `reset` is the normal entry point.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.in_episode = true;
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.theta = rng.random_range(-PI..=PI);
        self.theta_dot = rng.random_range(-1.0..=1.0);
        self.steps = 0;
        self.in_episode = true;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if !self.in_episode {
            return Err(Error::state("step called on a finished or unreset episode"));
        }
        if action.len() != 1 {
            return Err(Error::input("pendulum takes a single torque component"));
        }
        let torque = action[0];
        if !torque.is_finite() || torque.abs() > MAX_TORQUE {
            return Err(Error::input(format!(
                "torque {torque} outside [-{MAX_TORQUE}, {MAX_TORQUE}]"
            )));
        }

        let angle = angle_normalize(self.theta);
        let reward = -(angle * angle + 0.1 * self.theta_dot * self.theta_dot + 0.001 * torque * torque);

        // Semi-implicit Euler: velocity first, then position.
        let accel = (3.0 * GRAVITY / (2.0 * LENGTH)) * self.theta.sin()
            + (3.0 / (MASS * LENGTH * LENGTH)) * torque;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;

        self.steps += 1;
        let done = self.steps >= self.spec.max_episode_steps;
        if done {
            self.in_episode = false;
        }
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn reset_is_deterministic_and_in_bounds() {
        let mut env = Pendulum::new();
        let a = env.reset(&mut SeedTree::new(3).stream("env"));
        let b = env.reset(&mut SeedTree::new(3).stream("env"));
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        // (cos, sin) lie on the unit circle and theta_dot within [-1, 1].
        assert!((a[0] * a[0] + a[1] * a[1] - 1.0).abs() < 1e-12);
        assert!(a[2].abs() <= 1.0);
    }

    #[test]
    fn upright_equilibrium_is_a_fixed_point() {
        let mut env = Pendulum::new();
        env.set_state(0.0, 0.0);
        let r = env.step(&[0.0]).unwrap();
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.next_state, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn hanging_start_follows_hand_evaluated_euler_step() {
        // One hand-evaluated tick of the stated dynamics from (pi, 0).
        let mut env = Pendulum::new();
        env.set_state(PI, 0.0);
        let r = env.step(&[0.0]).unwrap();
        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * PI.sin();
        let expected_thdot = accel * DT;
        assert!(expected_thdot != 0.0 && expected_thdot.is_sign_positive());
        assert_eq!(r.next_state[2], expected_thdot);
    }

    #[test]
    fn episode_ends_exactly_at_step_limit() {
        let mut env = Pendulum::new();
        env.reset(&mut SeedTree::new(1).stream("env"));
        for i in 1..=EPISODE_STEPS {
            let r = env.step(&[0.5]).unwrap();
            assert_eq!(r.done, i == EPISODE_STEPS);
        }
        assert!(env.step(&[0.5]).is_err());
    }

    #[test]
    fn speed_saturates_at_limit() {
        let mut env = Pendulum::new();
        env.reset(&mut SeedTree::new(9).stream("env"));
        for _ in 0..EPISODE_STEPS {
            let r = env.step(&[2.0]).unwrap();
            assert!(r.next_state[2].abs() <= MAX_SPEED);
            assert!(r.next_state.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn trajectory_is_determined_by_seed_and_actions() {
        let run = |seed: u64| {
            let mut env = Pendulum::new();
            let mut obs = env.reset(&mut SeedTree::new(seed).stream("env"));
            let mut log = vec![];
            for i in 0..50 {
                let a = [((i as f64) * 0.1).sin()];
                let r = env.step(&a).unwrap();
                obs = r.next_state.clone();
                log.push((obs.clone(), r.reward));
            }
            log
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn out_of_bounds_torque_is_rejected() {
        let mut env = Pendulum::new();
        env.reset(&mut SeedTree::new(1).stream("env"));
        assert!(env.step(&[2.5]).is_err());
    }
}
