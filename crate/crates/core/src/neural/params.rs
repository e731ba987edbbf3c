//! Flat parameter storage and the operations that treat it as a vector:
//! initialization, finiteness checks, and soft target updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::spec::{Layout, NetworkSpec};

/// One network's weights as a flat vector plus the layout that maps slices
/// of it onto matrices, biases and layer-norm terms. This is both the genome
/// unit for evolution and the state unit for gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    values: Vec<f64>,
    spec: NetworkSpec,
    layout: Layout,
}

impl Parameters {
    /// Builds parameters from an existing flat vector; length must match the
    /// count implied by the spec.
    pub fn from_values(spec: NetworkSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::for_spec(&spec);
        if values.len() != layout.total_len {
            return Err(Error::input(format!(
                "parameter vector has length {}, spec implies {}",
                values.len(),
                layout.total_len
            )));
        }
        Ok(Self {
            values,
            spec,
            layout,
        })
    }

    /// All-zero parameters for the given shape.
    pub fn zeros(spec: &NetworkSpec) -> Parameters {
        let layout = Layout::for_spec(spec);
        Parameters {
            values: vec![0.0; layout.total_len],
            spec: spec.clone(),
            layout,
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// True when both parameter vectors describe the same network shape.
    pub fn congruent(&self, other: &Parameters) -> bool {
        self.spec == other.spec
    }
}

/// Fan-in-scaled uniform initialization: each weight matrix is drawn from
/// U[-1/sqrt(fan_in), +1/sqrt(fan_in)], biases start at zero, layer-norm
/// gains at one and layer-norm biases at zero. Deterministic given the rng.
pub fn init_network<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Parameters {
    let mut p = Parameters::zeros(spec);
    let layout = p.layout.clone();
    for layer in &layout.layers {
        for mat in &layer.mats {
            let bound = 1.0 / (mat.cols as f64).sqrt();
            for v in &mut p.values[mat.range()] {
                *v = rng.random_range(-bound..=bound);
            }
        }
        if let Some(ln) = &layer.ln {
            for v in &mut p.values[ln.gain.range()] {
                *v = 1.0;
            }
        }
    }
    p
}

/// Polyak update `target <- tau*source + (1-tau)*target`, elementwise.
pub fn soft_update(target: &mut Parameters, source: &Parameters, tau: f64) -> Result<()> {
    if !target.congruent(source) {
        return Err(Error::input("soft_update: parameter layouts differ"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::input(format!("soft_update: tau {tau} outside (0, 1]")));
    }
    for (t, s) in target.values.iter_mut().zip(source.values.iter()) {
        *t = tau * s + (1.0 - tau) * *t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn small_spec() -> NetworkSpec {
        NetworkSpec::actor(2, 1, &[4], true).unwrap()
    }

    #[test]
    fn init_is_deterministic_given_seed() {
        let spec = small_spec();
        let a = init_network(&spec, &mut SeedTree::new(7).stream("init"));
        let b = init_network(&spec, &mut SeedTree::new(7).stream("init"));
        assert_eq!(a, b);
        let c = init_network(&spec, &mut SeedTree::new(8).stream("init"));
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn init_respects_bounds_and_structure() {
        let spec = NetworkSpec::critic(3, 1, 4, &[5], true).unwrap();
        let p = init_network(&spec, &mut SeedTree::new(3).stream("init"));
        assert!(p.is_finite());
        for layer in &p.layout().layers {
            for mat in &layer.mats {
                let bound = 1.0 / (mat.cols as f64).sqrt();
                for &v in &p.values()[mat.range()] {
                    assert!(v.abs() <= bound);
                }
            }
            for &b in &p.values()[layer.bias.range()] {
                assert_eq!(b, 0.0);
            }
            if let Some(ln) = &layer.ln {
                assert!(p.values()[ln.gain.range()].iter().all(|&g| g == 1.0));
                assert!(p.values()[ln.bias.range()].iter().all(|&b| b == 0.0));
            }
        }
    }

    #[test]
    fn param_count_matches_vector_length() {
        for spec in [
            NetworkSpec::actor(3, 1, &[16, 16], true).unwrap(),
            NetworkSpec::actor(5, 2, &[8], false).unwrap(),
            NetworkSpec::critic(3, 1, 8, &[16], true).unwrap(),
            NetworkSpec::critic(4, 2, 3, &[7, 5], false).unwrap(),
        ] {
            let p = init_network(&spec, &mut SeedTree::new(1).stream("init"));
            assert_eq!(p.len(), spec.param_count());
        }
    }

    #[test]
    fn soft_update_tau_one_copies_source() {
        let spec = small_spec();
        let source = init_network(&spec, &mut SeedTree::new(1).stream("init"));
        let mut target = init_network(&spec, &mut SeedTree::new(2).stream("init"));
        soft_update(&mut target, &source, 1.0).unwrap();
        assert_eq!(target, source);
    }

    #[test]
    fn soft_update_small_tau_arithmetic() {
        let spec = NetworkSpec::actor(1, 1, &[], false).unwrap();
        let source = Parameters::from_values(spec.clone(), vec![1.0, 0.0]).unwrap();
        let mut target = Parameters::zeros(&spec);
        soft_update(&mut target, &source, 1e-3).unwrap();
        assert_eq!(target.values()[0], 1e-3);
    }

    #[test]
    fn soft_update_converges_monotonically() {
        let spec = small_spec();
        let source = init_network(&spec, &mut SeedTree::new(1).stream("init"));
        let mut target = init_network(&spec, &mut SeedTree::new(2).stream("init"));
        let gap = |t: &Parameters| {
            t.values()
                .iter()
                .zip(source.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let mut prev = gap(&target);
        for _ in 0..50 {
            soft_update(&mut target, &source, 0.1).unwrap();
            let next = gap(&target);
            assert!(next < prev);
            prev = next;
        }
    }

    #[test]
    fn soft_update_rejects_mismatched_layouts() {
        let a_spec = NetworkSpec::actor(2, 1, &[4], true).unwrap();
        let b_spec = NetworkSpec::actor(2, 1, &[5], true).unwrap();
        let source = Parameters::zeros(&a_spec);
        let mut target = Parameters::zeros(&b_spec);
        assert!(soft_update(&mut target, &source, 0.5).is_err());
    }
}
