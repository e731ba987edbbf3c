//! Adam optimizer with gradient clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::params::Parameters;

/// How gradients are clipped before entering the Adam update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipMode {
    /// Scale the whole gradient so its L2 norm is at most the threshold.
    GlobalNorm,
    /// Clamp each component into [-threshold, threshold].
    Value,
}

/// Optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub clip_mode: ClipMode,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64, clip_norm: f64) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            learning_rate,
            clip_norm,
            clip_mode: ClipMode::GlobalNorm,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam step on `params` along `-grad`. The gradient is clipped first
/// (see [`ClipMode`]); a non-finite gradient is rejected and the parameters
/// are left untouched.
pub fn adam_step(params: &mut Parameters, grad: &[f64], opt: &mut AdamState) -> Result<()> {
    if grad.len() != params.len() || opt.first_moment.len() != params.len() {
        return Err(Error::input("adam_step: gradient/state length mismatch"));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("adam_step: non-finite gradient"));
    }

    let scale = match opt.clip_mode {
        ClipMode::GlobalNorm => {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > opt.clip_norm {
                opt.clip_norm / norm
            } else {
                1.0
            }
        }
        ClipMode::Value => 1.0,
    };

    opt.step_count += 1;
    let t = opt.step_count as i32;
    let bias1 = 1.0 - opt.beta1.powi(t);
    let bias2 = 1.0 - opt.beta2.powi(t);

    let values = params.values_mut();
    for i in 0..values.len() {
        let g = match opt.clip_mode {
            ClipMode::GlobalNorm => grad[i] * scale,
            ClipMode::Value => grad[i].clamp(-opt.clip_norm, opt.clip_norm),
        };
        let m = opt.beta1 * opt.first_moment[i] + (1.0 - opt.beta1) * g;
        let v = opt.beta2 * opt.second_moment[i] + (1.0 - opt.beta2) * g * g;
        opt.first_moment[i] = m;
        opt.second_moment[i] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        values[i] -= opt.learning_rate * m_hat / (v_hat.sqrt() + opt.epsilon);
    }
    debug_assert!(params.is_finite());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::spec::NetworkSpec;

    fn scalar_params(v: f64) -> Parameters {
        // A 1->1 linear network: one weight, one bias.
        let spec = NetworkSpec::actor(1, 1, &[], false).unwrap();
        Parameters::from_values(spec, vec![v, 0.0]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = scalar_params(0.5);
        let before = p.clone();
        let mut opt = AdamState::new(2, 0.1, 10.0);
        adam_step(&mut p, &[0.0, 0.0], &mut opt).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn global_norm_clipping_caps_effective_gradient() {
        // Gradient of norm 100 against clip 10: the moments must see a
        // gradient of norm exactly 10.
        let mut p = scalar_params(0.0);
        let mut opt = AdamState::new(2, 0.1, 10.0);
        adam_step(&mut p, &[60.0, 80.0], &mut opt).unwrap();
        let seen = (opt.first_moment[0] / (1.0 - opt.beta1), opt.first_moment[1] / (1.0 - opt.beta1));
        let norm = (seen.0 * seen.0 + seen.1 * seen.1).sqrt();
        assert!((norm - 10.0).abs() < 1e-12, "effective norm {norm}");
    }

    #[test]
    fn value_clipping_clamps_components() {
        let mut p = scalar_params(0.0);
        let mut opt = AdamState::new(2, 0.1, 1.0);
        opt.clip_mode = ClipMode::Value;
        adam_step(&mut p, &[5.0, -0.5], &mut opt).unwrap();
        assert!((opt.first_moment[0] / (1.0 - opt.beta1) - 1.0).abs() < 1e-12);
        assert!((opt.first_moment[1] / (1.0 - opt.beta1) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_steps_match_hand_computed_recurrence() {
        // Single effective parameter, constant gradient 1, lr 0.1. The Adam
        // recurrence below is evaluated independently of the implementation.
        let mut p = scalar_params(1.0);
        let mut opt = AdamState::new(2, 0.1, 10.0);
        adam_step(&mut p, &[1.0, 0.0], &mut opt).unwrap();
        adam_step(&mut p, &[1.0, 0.0], &mut opt).unwrap();

        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 0.1);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut x: f64 = 1.0;
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * 1.0;
            v = b2 * v + (1.0 - b2) * 1.0;
            let m_hat = m / (1.0 - b1_pow(b1, t));
            let v_hat = v / (1.0 - b1_pow(b2, t));
            x -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert!((p.values()[0] - x).abs() < 1e-15, "{} vs {x}", p.values()[0]);
        assert_eq!(opt.step_count, 2);
    }

    fn b1_pow(b: f64, t: u32) -> f64 {
        b.powi(t as i32)
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_update() {
        let mut p = scalar_params(1.0);
        let before = p.clone();
        let mut opt = AdamState::new(2, 0.1, 10.0);
        let err = adam_step(&mut p, &[f64::NAN, 0.0], &mut opt);
        assert!(err.is_err());
        assert_eq!(p, before);
        assert_eq!(opt.step_count, 0);
    }
}
