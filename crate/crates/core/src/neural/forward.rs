//! Forward passes for the two supported topologies, with an optional tape
//! recording the intermediates that reverse-mode differentiation needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::params::Parameters;
use crate::neural::spec::{Activation, LayerLayout, OutputActivation};

/// Variance floor inside layer normalization.
pub const LN_EPSILON: f64 = 1e-5;

pub(crate) fn activate(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Tanh => x.tanh(),
        Activation::Elu => {
            if x > 0.0 {
                x
            } else {
                x.exp() - 1.0
            }
        }
    }
}

/// Activation derivative recovered from the activation's output.
pub(crate) fn activate_deriv_from_output(a: Activation, y: f64) -> f64 {
    match a {
        Activation::Tanh => 1.0 - y * y,
        Activation::Elu => {
            if y > 0.0 {
                1.0
            } else {
                y + 1.0
            }
        }
    }
}

pub(crate) fn output_activate(a: OutputActivation, x: f64) -> f64 {
    match a {
        OutputActivation::Tanh => x.tanh(),
        OutputActivation::Identity => x,
    }
}

pub(crate) fn output_deriv_from_output(a: OutputActivation, y: f64) -> f64 {
    match a {
        OutputActivation::Tanh => 1.0 - y * y,
        OutputActivation::Identity => 1.0,
    }
}

/// Per-layer intermediates recorded during a taped forward pass.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LayerTrace {
    /// Normalized pre-activation (x-hat) when layer norm is present.
    pub ln_xhat: Vec<f64>,
    /// 1/sqrt(var + eps) of the pre-activation, when layer norm is present.
    pub ln_inv_std: f64,
    /// Post-activation layer output.
    pub output: Vec<f64>,
}

/// Recorded intermediates of one forward pass, reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    pub(crate) input: Vec<f64>,
    pub(crate) layers: Vec<LayerTrace>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// The network output of the recorded pass.
    pub fn output(&self) -> &[f64] {
        &self.layers.last().expect("empty tape").output
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }
}

fn dense_forward(params: &[f64], layer: &LayerLayout, input: &[f64], pre: &mut [f64]) {
    let bias = &params[layer.bias.range()];
    pre.copy_from_slice(bias);
    let mut row_base = 0usize;
    let mut col_base = 0usize;
    for mat in &layer.mats {
        let w = &params[mat.range()];
        let x = &input[col_base..col_base + mat.cols];
        for r in 0..mat.rows {
            let row = &w[r * mat.cols..(r + 1) * mat.cols];
            let mut acc = 0.0;
            for (wv, xv) in row.iter().zip(x) {
                acc = wv.mul_add(*xv, acc);
            }
            pre[row_base + r] += acc;
        }
        row_base += mat.rows;
        col_base += mat.cols;
    }
}

fn layer_norm_forward(
    params: &[f64],
    layer: &LayerLayout,
    pre: &mut [f64],
    xhat: &mut Vec<f64>,
    inv_std: &mut f64,
) {
    let ln = layer.ln.as_ref().expect("layer without norm");
    let n = pre.len() as f64;
    let mean = pre.iter().sum::<f64>() / n;
    let var = pre.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / n;
    let istd = 1.0 / (var + LN_EPSILON).sqrt();
    *inv_std = istd;
    xhat.clear();
    xhat.extend(pre.iter().map(|z| (z - mean) * istd));
    let gain = &params[ln.gain.range()];
    let bias = &params[ln.bias.range()];
    for i in 0..pre.len() {
        pre[i] = gain[i].mul_add(xhat[i], bias[i]);
    }
}

/// Runs the network on `input`, recording intermediates into `tape`. The
/// tape's buffers are reused across calls.
pub fn forward_tape(p: &Parameters, input: &[f64], tape: &mut Tape) -> Result<()> {
    let spec = p.spec();
    if input.len() != spec.input_dim {
        return Err(Error::input(format!(
            "input has length {}, network expects {}",
            input.len(),
            spec.input_dim
        )));
    }
    let layout = p.layout();
    tape.input.clear();
    tape.input.extend_from_slice(input);
    tape.layers.resize_with(layout.layers.len(), LayerTrace::default);

    let num_layers = layout.layers.len();
    for i in 0..num_layers {
        let (done, rest) = tape.layers.split_at_mut(i);
        let layer_input: &[f64] = if i == 0 {
            &tape.input
        } else {
            &done[i - 1].output
        };
        let trace = &mut rest[0];
        let layer = &layout.layers[i];

        trace.output.resize(layer.out_dim, 0.0);
        dense_forward(p.values(), layer, layer_input, &mut trace.output);
        if layer.ln.is_some() {
            let mut pre = std::mem::take(&mut trace.output);
            layer_norm_forward(p.values(), layer, &mut pre, &mut trace.ln_xhat, &mut trace.ln_inv_std);
            trace.output = pre;
        }

        let is_hidden = i + 1 < num_layers;
        if is_hidden {
            for v in trace.output.iter_mut() {
                *v = activate(spec.activation, *v);
            }
        } else {
            for v in trace.output.iter_mut() {
                *v = output_activate(spec.output_activation, *v);
            }
        }
    }
    Ok(())
}

/// Plain forward pass without recording; returns the output vector.
pub fn forward(p: &Parameters, input: &[f64]) -> Result<Vec<f64>> {
    let spec = p.spec();
    if input.len() != spec.input_dim {
        return Err(Error::input(format!(
            "input has length {}, network expects {}",
            input.len(),
            spec.input_dim
        )));
    }
    let layout = p.layout();
    let num_layers = layout.layers.len();
    let mut cur = input.to_vec();
    let mut next = Vec::new();
    let mut xhat = Vec::new();
    for (i, layer) in layout.layers.iter().enumerate() {
        next.resize(layer.out_dim, 0.0);
        dense_forward(p.values(), layer, &cur, &mut next);
        if layer.ln.is_some() {
            let mut istd = 0.0;
            layer_norm_forward(p.values(), layer, &mut next, &mut xhat, &mut istd);
        }
        let is_hidden = i + 1 < num_layers;
        for v in next.iter_mut() {
            *v = if is_hidden {
                activate(spec.activation, *v)
            } else {
                output_activate(spec.output_activation, *v)
            };
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Deterministic policy: state in, action out, every component in [-1, 1].
pub fn forward_actor(p: &Parameters, state: &[f64]) -> Result<Vec<f64>> {
    let spec = p.spec();
    if spec.critic_split.is_some() {
        return Err(Error::input("forward_actor called on a split network"));
    }
    if spec.output_activation != OutputActivation::Tanh {
        return Err(Error::input("actor networks must end in tanh"));
    }
    forward(p, state)
}

/// Action-value: (state, action) in, scalar out.
pub fn forward_critic(p: &Parameters, state: &[f64], action: &[f64]) -> Result<f64> {
    let split = p
        .spec()
        .critic_split
        .ok_or_else(|| Error::input("forward_critic called on a network without a split input"))?;
    if state.len() != split.state_dim || action.len() != split.action_dim {
        return Err(Error::input(format!(
            "critic expects state {} / action {}, got {} / {}",
            split.state_dim,
            split.action_dim,
            state.len(),
            action.len()
        )));
    }
    let mut input = Vec::with_capacity(state.len() + action.len());
    input.extend_from_slice(state);
    input.extend_from_slice(action);
    let out = forward(p, &input)?;
    Ok(out[0])
}
