//! Evolutionary reinforcement learning for continuous control.
//!
//! A population of actor networks evolves by fitness-ranked selection,
//! per-neuron crossover and sparse weight mutation, while every transition
//! its members generate feeds a shared replay buffer. An off-policy
//! actor-critic learner (DDPG) trains on that buffer and is periodically
//! copied back over the weakest population slot, injecting gradient
//! progress into the search. Either half runs alone: the `ddpg` and `ea`
//! arms are the same loop with components switched off.
//!
//! The crate ships desk-scale pendulum tasks (dense and delayed-reward), a
//! seeded experiment harness that writes reproducible learning curves, and
//! a comparison tool for seed sweeps; see the `evorl-cli` binary for the
//! command-line entry points.

pub mod config;
pub mod ddpg;
pub mod env;
pub mod erl;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod neural;
pub mod replay;
pub mod returns;
pub mod rng;

pub use config::ErlConfig;
pub use error::{Error, Result};
