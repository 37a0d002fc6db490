//! Single-direction LSTM forward pass and backpropagation through time.
//!
//! Gate pre-activations are packed `[input, forget, cell, output]`, each a
//! `hidden_dim` block, so the weight matrices are `4H x D` (input) and
//! `4H x H` (recurrent), row-major. The backward direction reuses the same
//! code by walking the token indices in reverse; all buffers exposed to the
//! caller stay in original token order.

use alloc::vec::Vec;

pub(crate) struct LstmWeights<'a> {
    pub input: &'a [f64],
    pub recurrent: &'a [f64],
    pub bias: &'a [f64],
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Activations cached per processing step for backprop.
pub(crate) struct LstmTrace {
    /// Hidden states in original token order (what downstream layers read).
    pub hidden: Vec<f64>,
    gate_i: Vec<f64>,
    gate_f: Vec<f64>,
    gate_g: Vec<f64>,
    gate_o: Vec<f64>,
    cell: Vec<f64>,
    tanh_cell: Vec<f64>,
    /// Hidden states in processing-step order (recurrent inputs).
    hidden_steps: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
fn step_index(s: usize, t_len: usize, reversed: bool) -> usize {
    if reversed {
        t_len - 1 - s
    } else {
        s
    }
}

/// Run the LSTM over `xs` (t_len x input_dim, original order).
pub(crate) fn run(w: &LstmWeights<'_>, xs: &[f64], t_len: usize, reversed: bool) -> LstmTrace {
    let (d, h) = (w.input_dim, w.hidden_dim);
    let gates = 4 * h;
    let mut trace = LstmTrace {
        hidden: alloc::vec![0.0; t_len * h],
        gate_i: alloc::vec![0.0; t_len * h],
        gate_f: alloc::vec![0.0; t_len * h],
        gate_g: alloc::vec![0.0; t_len * h],
        gate_o: alloc::vec![0.0; t_len * h],
        cell: alloc::vec![0.0; t_len * h],
        tanh_cell: alloc::vec![0.0; t_len * h],
        hidden_steps: alloc::vec![0.0; t_len * h],
    };
    let mut h_prev = alloc::vec![0.0; h];
    let mut c_prev = alloc::vec![0.0; h];
    let mut z = alloc::vec![0.0; gates];

    for s in 0..t_len {
        let t = step_index(s, t_len, reversed);
        let x = &xs[t * d..(t + 1) * d];
        for (r, zr) in z.iter_mut().enumerate() {
            let mut acc = w.bias[r];
            let wx = &w.input[r * d..(r + 1) * d];
            for j in 0..d {
                acc += wx[j] * x[j];
            }
            let wh = &w.recurrent[r * h..(r + 1) * h];
            for j in 0..h {
                acc += wh[j] * h_prev[j];
            }
            *zr = acc;
        }
        let at = s * h;
        for j in 0..h {
            let gi = sigmoid(z[j]);
            let gf = sigmoid(z[h + j]);
            let gg = libm::tanh(z[2 * h + j]);
            let go = sigmoid(z[3 * h + j]);
            let c = gf * c_prev[j] + gi * gg;
            let tc = libm::tanh(c);
            let hj = go * tc;
            trace.gate_i[at + j] = gi;
            trace.gate_f[at + j] = gf;
            trace.gate_g[at + j] = gg;
            trace.gate_o[at + j] = go;
            trace.cell[at + j] = c;
            trace.tanh_cell[at + j] = tc;
            trace.hidden_steps[at + j] = hj;
            trace.hidden[t * h + j] = hj;
            c_prev[j] = c;
            h_prev[j] = hj;
        }
    }
    trace
}

/// Backprop through time, accumulating into the weight gradients and the
/// per-token input gradient `d_xs` (original order).
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    w: &LstmWeights<'_>,
    xs: &[f64],
    trace: &LstmTrace,
    d_hidden: &[f64],
    t_len: usize,
    reversed: bool,
    g_input: &mut [f64],
    g_recurrent: &mut [f64],
    g_bias: &mut [f64],
    d_xs: &mut [f64],
) {
    let (d, h) = (w.input_dim, w.hidden_dim);
    let mut dh_rec = alloc::vec![0.0; h];
    let mut dc_rec = alloc::vec![0.0; h];
    let mut dz = alloc::vec![0.0; 4 * h];

    for s in (0..t_len).rev() {
        let t = step_index(s, t_len, reversed);
        let at = s * h;
        for j in 0..h {
            let dh = d_hidden[t * h + j] + dh_rec[j];
            let go = trace.gate_o[at + j];
            let tc = trace.tanh_cell[at + j];
            let d_o = dh * tc;
            let mut dc = dc_rec[j] + dh * go * (1.0 - tc * tc);
            let gi = trace.gate_i[at + j];
            let gf = trace.gate_f[at + j];
            let gg = trace.gate_g[at + j];
            let c_prev = if s == 0 { 0.0 } else { trace.cell[at - h + j] };
            let d_i = dc * gg;
            let d_g = dc * gi;
            let d_f = dc * c_prev;
            dc *= gf;
            dc_rec[j] = dc;
            dz[j] = d_i * gi * (1.0 - gi);
            dz[h + j] = d_f * gf * (1.0 - gf);
            dz[2 * h + j] = d_g * (1.0 - gg * gg);
            dz[3 * h + j] = d_o * go * (1.0 - go);
        }

        let x = &xs[t * d..(t + 1) * d];
        let dx = &mut d_xs[t * d..(t + 1) * d];
        for j in dh_rec.iter_mut() {
            *j = 0.0;
        }
        for (r, &dzr) in dz.iter().enumerate() {
            g_bias[r] += dzr;
            let g_wx = &mut g_input[r * d..(r + 1) * d];
            let wx = &w.input[r * d..(r + 1) * d];
            for j in 0..d {
                g_wx[j] += dzr * x[j];
                dx[j] += dzr * wx[j];
            }
            let g_wh = &mut g_recurrent[r * h..(r + 1) * h];
            let wh = &w.recurrent[r * h..(r + 1) * h];
            if s > 0 {
                let h_prev = &trace.hidden_steps[at - h..at];
                for j in 0..h {
                    g_wh[j] += dzr * h_prev[j];
                    dh_rec[j] += dzr * wh[j];
                }
            }
        }
    }
}
