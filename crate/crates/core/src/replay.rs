//! Cyclic experience buffer shared by the evolutionary population and the
//! gradient learner. Once full, each push overwrites the oldest entry.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::Transition;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    storage: Vec<Transition>,
    write_cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::input("replay capacity must be >= 1"));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            storage: Vec::with_capacity(capacity.min(1 << 20)),
            write_cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Appends a transition, overwriting the oldest entry when full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.state.len() != self.state_dim
            || t.next_state.len() != self.state_dim
            || t.action.len() != self.action_dim
        {
            return Err(Error::input(format!(
                "transition dims (s={}, a={}, s'={}) do not match buffer (s={}, a={})",
                t.state.len(),
                t.action.len(),
                t.next_state.len(),
                self.state_dim,
                self.action_dim
            )));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_cursor] = t;
        }
        self.write_cursor = (self.write_cursor + 1) % self.capacity;
        Ok(())
    }

    /// Draws `batch_size` transitions uniformly with replacement.
    pub fn sample(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Transition>> {
        if self.storage.is_empty() {
            return Err(Error::state("sample from an empty replay buffer"));
        }
        Ok((0..batch_size)
            .map(|_| self.storage[rng.random_range(0..self.storage.len())].clone())
            .collect())
    }

    /// Current contents in unspecified order (for tests and diagnostics).
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn labeled(label: f64) -> Transition {
        Transition {
            state: vec![label],
            action: vec![0.0],
            reward: label,
            next_state: vec![label],
            done: false,
        }
    }

    fn buffer(capacity: usize) -> ReplayBuffer {
        ReplayBuffer::new(capacity, 1, 1).unwrap()
    }

    #[test]
    fn overwrites_oldest_when_full() {
        let mut buf = buffer(8);
        for i in 1..=12 {
            buf.push(labeled(i as f64)).unwrap();
        }
        assert_eq!(buf.len(), 8);
        assert_eq!(buf.capacity(), 8);
        let mut labels: Vec<i64> = buf.iter().map(|t| t.reward as i64).collect();
        labels.sort_unstable();
        assert_eq!(labels, vec![5, 6, 7, 8, 9, 10, 11, 12]);
    }

    #[test]
    fn push_grows_until_capacity() {
        let mut buf = buffer(4);
        assert!(buf.is_empty());
        buf.push(labeled(1.0)).unwrap();
        assert_eq!(buf.len(), 1);
        for i in 2..=10 {
            buf.push(labeled(i as f64)).unwrap();
            assert_eq!(buf.len(), (i).min(4));
        }
    }

    #[test]
    fn fifo_multiset_matches_last_n_pushes() {
        let mut buf = buffer(5);
        for n in 1..=20i64 {
            buf.push(labeled(n as f64)).unwrap();
            let mut got: Vec<i64> = buf.iter().map(|t| t.reward as i64).collect();
            got.sort_unstable();
            let lo = (n - 4).max(1);
            let want: Vec<i64> = (lo..=n).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn sample_from_singleton_repeats_it() {
        let mut buf = buffer(8);
        buf.push(labeled(3.0)).unwrap();
        let mut rng = SeedTree::new(1).stream("replay");
        let batch = buf.sample(128, &mut rng).unwrap();
        assert_eq!(batch.len(), 128);
        assert!(batch.iter().all(|t| t.reward == 3.0));
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn empty_sample_is_a_state_error() {
        let buf = buffer(8);
        let mut rng = SeedTree::new(1).stream("replay");
        assert!(buf.sample(4, &mut rng).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut buf = ReplayBuffer::new(8, 3, 1).unwrap();
        assert!(buf.push(labeled(1.0)).is_err());
    }

    #[test]
    fn sampling_is_uniform_within_three_sigma() {
        let mut buf = buffer(10);
        for i in 0..10 {
            buf.push(labeled(i as f64)).unwrap();
        }
        let mut rng = SeedTree::new(7).stream("replay");
        let draws = 100_000usize;
        let mut counts = [0usize; 10];
        for t in buf.sample(draws, &mut rng).unwrap() {
            counts[t.reward as usize] += 1;
        }
        // Per-element count is Binomial(draws, 1/10).
        let mean = draws as f64 / 10.0;
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - mean).abs();
            assert!(dev <= 3.0 * sigma, "element {i}: count {c} deviates {dev:.1} > 3 sigma");
        }
    }
}
