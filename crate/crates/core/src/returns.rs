//! Scalar return definitions shared by tests and metrics.

use crate::error::{Error, Result};

/// A finite episode's reward sequence plus the discount used for
/// [`discounted_return`].
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTrace {
    pub rewards: Vec<f64>,
    pub gamma: f64,
}

impl RewardTrace {
    pub fn new(rewards: Vec<f64>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::input(format!("discount {gamma} outside (0, 1]")));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::input("reward trace contains non-finite entries"));
        }
        Ok(Self { rewards, gamma })
    }
}

/// Discounted return from index `t` to the end of the episode:
/// sum over k >= 0 of gamma^k * r[t+k].
pub fn discounted_return(trace: &RewardTrace, t: usize) -> Result<f64> {
    if t >= trace.rewards.len() {
        return Err(Error::input(format!(
            "index {t} out of range for trace of length {}",
            trace.rewards.len()
        )));
    }
    // Head-first accumulation: for gamma = 1 the weights stay exactly 1.0,
    // so this reproduces `episode_fitness`'s sum bit for bit.
    let mut acc = 0.0;
    let mut weight = 1.0;
    for &r in &trace.rewards[t..] {
        acc += weight * r;
        weight *= trace.gamma;
    }
    Ok(acc)
}

/// Undiscounted episode-total reward: the fitness signal used for selection.
/// Empty traces score zero.
pub fn episode_fitness(trace: &RewardTrace) -> f64 {
    trace.rewards.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn undiscounted_sum() {
        let t = RewardTrace::new(vec![1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!(discounted_return(&t, 0).unwrap(), 3.0);
    }

    #[test]
    fn half_discount_arithmetic() {
        let t = RewardTrace::new(vec![1.0, 1.0], 0.5).unwrap();
        assert_eq!(discounted_return(&t, 0).unwrap(), 1.5);
    }

    #[test]
    fn last_index_returns_last_reward() {
        let t = RewardTrace::new(vec![3.0, -2.0, 7.5], 0.9).unwrap();
        assert_eq!(discounted_return(&t, 2).unwrap(), 7.5);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let t = RewardTrace::new(vec![1.0], 0.9).unwrap();
        assert!(discounted_return(&t, 1).is_err());
    }

    #[test]
    fn fitness_examples() {
        let t = RewardTrace::new(vec![0.0, 0.0, -6.0], 1.0).unwrap();
        assert_eq!(episode_fitness(&t), -6.0);
        let empty = RewardTrace::new(vec![], 1.0).unwrap();
        assert_eq!(episode_fitness(&empty), 0.0);
    }

    proptest! {
        #[test]
        fn fitness_equals_undiscounted_return_from_zero(
            rewards in proptest::collection::vec(-100.0f64..100.0, 1..50)
        ) {
            let t = RewardTrace::new(rewards, 1.0).unwrap();
            prop_assert_eq!(episode_fitness(&t), discounted_return(&t, 0).unwrap());
        }
    }
}
