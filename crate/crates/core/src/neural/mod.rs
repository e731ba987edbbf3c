//! Minimal feed-forward network machinery: parameter storage, forward passes
//! for the actor and critic topologies (with layer normalization), exact
//! reverse-mode gradients, Adam with gradient clipping, and soft target
//! updates.

mod adam;
mod backward;
mod forward;
mod params;
mod spec;

pub use adam::{adam_step, AdamState, ClipMode};
pub use backward::{backward, Gradient};
pub use forward::{
    forward, forward_actor, forward_critic, forward_tape, LayerTrace, Tape, LN_EPSILON,
};
pub use params::{init_network, soft_update, Parameters};
pub use spec::{Activation, CriticSplit, LayerLayout, Layout, MatBlock, NetworkSpec, OutputActivation, VecBlock};
