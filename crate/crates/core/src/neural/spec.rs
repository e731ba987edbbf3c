//! Network shape descriptions and the flat parameter layout they induce.
//!
//! Two fixed topologies are supported: a plain multilayer perceptron (the
//! actor) and a variant whose first hidden layer is split into two
//! sub-layers, one fed by the state and one by the action (the critic).
//! Hidden layers may carry layer normalization with learnable gain and bias
//! on the pre-activation; the output layer never does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Elu,
}

/// Output-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Tanh,
    Identity,
}

/// Marks the first hidden layer as split into a state branch and an action
/// branch of equal width; the two branch outputs are concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticSplit {
    pub state_dim: usize,
    pub action_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub output_activation: OutputActivation,
    pub layer_norm: bool,
    pub critic_split: Option<CriticSplit>,
}

impl NetworkSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        activation: Activation,
        output_activation: OutputActivation,
        layer_norm: bool,
        critic_split: Option<CriticSplit>,
    ) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation,
            output_activation,
            layer_norm,
            critic_split,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Tanh-in, tanh-out multilayer perceptron mapping states to actions.
    pub fn actor(state_dim: usize, action_dim: usize, hidden: &[usize], layer_norm: bool) -> Result<Self> {
        Self::new(
            state_dim,
            hidden.to_vec(),
            action_dim,
            Activation::Tanh,
            OutputActivation::Tanh,
            layer_norm,
            None,
        )
    }

    /// Split-input elu network mapping (state, action) to a scalar value.
    /// `sub_units` is the width of each of the two first-layer branches.
    pub fn critic(
        state_dim: usize,
        action_dim: usize,
        sub_units: usize,
        tail: &[usize],
        layer_norm: bool,
    ) -> Result<Self> {
        let mut hidden = Vec::with_capacity(tail.len() + 1);
        hidden.push(2 * sub_units);
        hidden.extend_from_slice(tail);
        Self::new(
            state_dim + action_dim,
            hidden,
            1,
            Activation::Elu,
            OutputActivation::Identity,
            layer_norm,
            Some(CriticSplit {
                state_dim,
                action_dim,
            }),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::input("network dims must be >= 1"));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::input("hidden dims must be >= 1"));
        }
        if let Some(split) = self.critic_split {
            if split.state_dim == 0 || split.action_dim == 0 {
                return Err(Error::input("critic split dims must be >= 1"));
            }
            if split.state_dim + split.action_dim != self.input_dim {
                return Err(Error::input(format!(
                    "critic split {}+{} does not cover input_dim {}",
                    split.state_dim, split.action_dim, self.input_dim
                )));
            }
            let first = *self
                .hidden_dims
                .first()
                .ok_or_else(|| Error::input("split network needs at least one hidden layer"))?;
            if first % 2 != 0 {
                return Err(Error::input(format!(
                    "first hidden dim {first} must be even to split into two equal branches"
                )));
            }
        }
        Ok(())
    }

    /// Total number of scalar parameters implied by this shape.
    pub fn param_count(&self) -> usize {
        Layout::for_spec(self).total_len
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

/// A row-major weight matrix block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatBlock {
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl MatBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// A contiguous vector block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VecBlock {
    pub len: usize,
    pub offset: usize,
}

impl VecBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Layer-norm gain and bias blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LnBlock {
    pub gain: VecBlock,
    pub bias: VecBlock,
}

/// One layer's slices. A dense layer has one weight matrix; a split layer
/// has two, with `mats[0]` fed by the first `mats[0].cols` inputs and
/// `mats[1]` by the rest. Bias entry `r` (and layer-norm entry `r`, when
/// present) pairs with output row `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerLayout {
    pub in_dim: usize,
    pub out_dim: usize,
    pub mats: Vec<MatBlock>,
    pub bias: VecBlock,
    pub ln: Option<LnBlock>,
}

/// Mapping from a [`NetworkSpec`] to slices of the flat parameter vector.
/// Order: per layer, weight matrices, bias, then layer-norm gain and bias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub layers: Vec<LayerLayout>,
    pub total_len: usize,
}

impl Layout {
    pub fn for_spec(spec: &NetworkSpec) -> Layout {
        let mut layers = Vec::with_capacity(spec.num_layers());
        let mut offset = 0usize;
        let mut in_dim = spec.input_dim;
        let num_layers = spec.num_layers();

        for layer_ix in 0..num_layers {
            let out_dim = if layer_ix < spec.hidden_dims.len() {
                spec.hidden_dims[layer_ix]
            } else {
                spec.output_dim
            };

            let mut mats = Vec::with_capacity(2);
            match (layer_ix, spec.critic_split) {
                (0, Some(split)) => {
                    let sub = out_dim / 2;
                    for cols in [split.state_dim, split.action_dim] {
                        mats.push(MatBlock {
                            rows: sub,
                            cols,
                            offset,
                        });
                        offset += sub * cols;
                    }
                }
                _ => {
                    mats.push(MatBlock {
                        rows: out_dim,
                        cols: in_dim,
                        offset,
                    });
                    offset += out_dim * in_dim;
                }
            }

            let bias = VecBlock {
                len: out_dim,
                offset,
            };
            offset += out_dim;

            let is_hidden = layer_ix < spec.hidden_dims.len();
            let ln = if spec.layer_norm && is_hidden {
                let gain = VecBlock {
                    len: out_dim,
                    offset,
                };
                offset += out_dim;
                let bias = VecBlock {
                    len: out_dim,
                    offset,
                };
                offset += out_dim;
                Some(LnBlock { gain, bias })
            } else {
                None
            };

            layers.push(LayerLayout {
                in_dim,
                out_dim,
                mats,
                bias,
                ln,
            });
            in_dim = out_dim;
        }

        Layout {
            layers,
            total_len: offset,
        }
    }
}
