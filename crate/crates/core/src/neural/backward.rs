//! Exact reverse-mode differentiation over a recorded forward tape.

use crate::error::{Error, Result};
use crate::neural::forward::{activate_deriv_from_output, output_deriv_from_output, Tape};
use crate::neural::params::Parameters;
use crate::neural::spec::NetworkSpec;

/// Gradient of a scalar objective with respect to every parameter and to the
/// network input. `wrt_params` accumulates across calls (zero it with
/// [`Gradient::reset`] between unrelated uses); `wrt_input` is overwritten
/// on every call.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub wrt_params: Vec<f64>,
    pub wrt_input: Vec<f64>,
    d_cur: Vec<f64>,
    d_prev: Vec<f64>,
    d_xhat: Vec<f64>,
}

impl Gradient {
    pub fn for_spec(spec: &NetworkSpec) -> Self {
        Self {
            wrt_params: vec![0.0; spec.param_count()],
            wrt_input: vec![0.0; spec.input_dim],
            d_cur: Vec::new(),
            d_prev: Vec::new(),
            d_xhat: Vec::new(),
        }
    }

    pub fn reset(&mut self) {
        self.wrt_params.iter_mut().for_each(|v| *v = 0.0);
        self.wrt_input.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Backpropagates `upstream` (the objective gradient with respect to the
/// network output) through the pass recorded in `tape`, accumulating into
/// `grad.wrt_params` and writing the input gradient to `grad.wrt_input`.
pub fn backward(p: &Parameters, tape: &Tape, upstream: &[f64], grad: &mut Gradient) -> Result<()> {
    let spec = p.spec();
    let layout = p.layout();
    if tape.layers.len() != layout.layers.len() || tape.input.len() != spec.input_dim {
        return Err(Error::input("backward: tape does not match this network"));
    }
    if upstream.len() != spec.output_dim {
        return Err(Error::input(format!(
            "backward: upstream gradient has length {}, output_dim is {}",
            upstream.len(),
            spec.output_dim
        )));
    }
    if grad.wrt_params.len() != layout.total_len {
        return Err(Error::input("backward: gradient buffer has the wrong length"));
    }

    let num_layers = layout.layers.len();
    grad.d_cur.clear();
    grad.d_cur.extend_from_slice(upstream);

    for i in (0..num_layers).rev() {
        let layer = &layout.layers[i];
        let trace = &tape.layers[i];
        let is_last = i + 1 == num_layers;

        // Activation backward, from recorded outputs.
        for (d, &y) in grad.d_cur.iter_mut().zip(&trace.output) {
            *d *= if is_last {
                output_deriv_from_output(spec.output_activation, y)
            } else {
                activate_deriv_from_output(spec.activation, y)
            };
        }

        // Layer-norm backward: gain/bias gradients, then gradient through
        // the normalization itself.
        if let Some(ln) = &layer.ln {
            let n = layer.out_dim as f64;
            let gain = &p.values()[ln.gain.range()];
            grad.d_xhat.resize(layer.out_dim, 0.0);
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for j in 0..layer.out_dim {
                let d = grad.d_cur[j];
                grad.wrt_params[ln.gain.offset + j] += d * trace.ln_xhat[j];
                grad.wrt_params[ln.bias.offset + j] += d;
                let dx = d * gain[j];
                grad.d_xhat[j] = dx;
                sum_dxhat += dx;
                sum_dxhat_xhat += dx * trace.ln_xhat[j];
            }
            let m1 = sum_dxhat / n;
            let m2 = sum_dxhat_xhat / n;
            for j in 0..layer.out_dim {
                grad.d_cur[j] = trace.ln_inv_std * (grad.d_xhat[j] - m1 - trace.ln_xhat[j] * m2);
            }
        }

        // Linear backward.
        let input: &[f64] = if i == 0 {
            &tape.input
        } else {
            &tape.layers[i - 1].output
        };
        for j in 0..layer.out_dim {
            grad.wrt_params[layer.bias.offset + j] += grad.d_cur[j];
        }
        grad.d_prev.clear();
        grad.d_prev.resize(layer.in_dim, 0.0);
        let mut row_base = 0usize;
        let mut col_base = 0usize;
        for mat in &layer.mats {
            let w = &p.values()[mat.range()];
            for r in 0..mat.rows {
                let dz = grad.d_cur[row_base + r];
                let w_row = &w[r * mat.cols..(r + 1) * mat.cols];
                let g_row =
                    &mut grad.wrt_params[mat.offset + r * mat.cols..mat.offset + (r + 1) * mat.cols];
                for c in 0..mat.cols {
                    g_row[c] = dz.mul_add(input[col_base + c], g_row[c]);
                    grad.d_prev[col_base + c] = w_row[c].mul_add(dz, grad.d_prev[col_base + c]);
                }
            }
            row_base += mat.rows;
            col_base += mat.cols;
        }
        std::mem::swap(&mut grad.d_cur, &mut grad.d_prev);
    }

    grad.wrt_input.clear();
    grad.wrt_input.extend_from_slice(&grad.d_cur);
    Ok(())
}
