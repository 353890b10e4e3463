//! Stacked GRU with a linear read-out, flat parameter storage and
//! backpropagation through the unrolled window.
//!
//! Gate equations per layer and step (`x` input, `h` previous hidden state):
//!
//! ```text
//! r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! u  = sigmoid(W_iu x + b_iu + W_hu h + b_hu)
//! n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//! h' = (1 - u) * n + u * h
//! ```
//!
//! Flat parameter order, repeated for each layer `l` (input width `in_l` is the
//! predictor input width for layer 0 and `hidden` above it):
//!
//! 1. `w_ih`: `3 * hidden x in_l`, row-major, gate blocks ordered reset, update, candidate
//! 2. `w_hh`: `3 * hidden x hidden`, same block order
//! 3. `b_ih`: `3 * hidden`
//! 4. `b_hh`: `3 * hidden`
//!
//! followed by the read-out `w_out` (`latent_dim x hidden`, row-major) and `b_out`
//! (`latent_dim`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerOffsets {
    pub input: usize,
    pub w_ih: usize,
    pub w_hh: usize,
    pub b_ih: usize,
    pub b_hh: usize,
}

/// Offsets of every parameter block inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub latent_dim: usize,
    pub input_dim: usize,
    pub hidden: usize,
    pub(crate) layers: Vec<LayerOffsets>,
    pub w_out: usize,
    pub b_out: usize,
    pub len: usize,
}

impl Layout {
    pub fn new(latent_dim: usize, input_dim: usize, hidden: usize, num_layers: usize) -> Self {
        let mut pos = 0;
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let input = if l == 0 { input_dim } else { hidden };
            let w_ih = pos;
            pos += 3 * hidden * input;
            let w_hh = pos;
            pos += 3 * hidden * hidden;
            let b_ih = pos;
            pos += 3 * hidden;
            let b_hh = pos;
            pos += 3 * hidden;
            layers.push(LayerOffsets {
                input,
                w_ih,
                w_hh,
                b_ih,
                b_hh,
            });
        }
        let w_out = pos;
        pos += latent_dim * hidden;
        let b_out = pos;
        pos += latent_dim;
        Layout {
            latent_dim,
            input_dim,
            hidden,
            layers,
            w_out,
            b_out,
            len: pos,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) weights, zero biases.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (self.hidden as f64).sqrt();
        let mut data = vec![0.0; self.len];
        let mut fill = |start: usize, len: usize| {
            for v in &mut data[start..start + len] {
                *v = rng.random_range(-bound..=bound);
            }
        };
        for layer in &self.layers {
            fill(layer.w_ih, 3 * self.hidden * layer.input);
            fill(layer.w_hh, 3 * self.hidden * self.hidden);
        }
        fill(self.w_out, self.latent_dim * self.hidden);
        data
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out[i] = bias[i] + sum_j w[i, j] * x[j]` for a row-major `rows x x.len()` block.
fn affine(w: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        *o = bias[i] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out[j] += sum_i w[i, j] * g[i]`.
fn affine_transpose_acc(w: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (i, &gi) in g.iter().enumerate() {
        if gi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * gi;
        }
    }
}

/// `dw[i, j] += g[i] * x[j]`.
fn outer_acc(dw: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (i, &gi) in g.iter().enumerate() {
        if gi == 0.0 {
            continue;
        }
        let row = &mut dw[i * cols..(i + 1) * cols];
        for (d, xj) in row.iter_mut().zip(x) {
            *d += gi * xj;
        }
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LayerTrace {
    /// `steps + 1` hidden states, the first being the zero initial state.
    hidden: Vec<Vec<f64>>,
    reset: Vec<Vec<f64>>,
    update: Vec<Vec<f64>>,
    cand: Vec<Vec<f64>>,
    /// `W_hn h + b_hn`, needed for the reset-gate gradient.
    hn: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    pub delta: Vec<f64>,
    layers: Vec<LayerTrace>,
}

/// Unroll the stack over `inputs` from a zero hidden state and read out the
/// predicted latent change from the final top-layer hidden state.
pub(crate) fn forward(layout: &Layout, params: &[f64], inputs: &[Vec<f64>]) -> ForwardTrace {
    let h = layout.hidden;
    let steps = inputs.len();
    let mut layers: Vec<LayerTrace> = Vec::with_capacity(layout.num_layers());
    let mut gi = vec![0.0; 3 * h];
    let mut gh = vec![0.0; 3 * h];
    for (l, off) in layout.layers.iter().enumerate() {
        let w_ih = &params[off.w_ih..off.w_ih + 3 * h * off.input];
        let w_hh = &params[off.w_hh..off.w_hh + 3 * h * h];
        let b_ih = &params[off.b_ih..off.b_ih + 3 * h];
        let b_hh = &params[off.b_hh..off.b_hh + 3 * h];
        let mut tr = LayerTrace {
            hidden: Vec::with_capacity(steps + 1),
            reset: Vec::with_capacity(steps),
            update: Vec::with_capacity(steps),
            cand: Vec::with_capacity(steps),
            hn: Vec::with_capacity(steps),
        };
        tr.hidden.push(vec![0.0; h]);
        #[allow(clippy::needless_range_loop)]
        for t in 0..steps {
            let x: &[f64] = if l == 0 {
                &inputs[t]
            } else {
                &layers[l - 1].hidden[t + 1]
            };
            let h_prev = &tr.hidden[t];
            affine(w_ih, b_ih, x, &mut gi);
            affine(w_hh, b_hh, h_prev, &mut gh);
            let mut r = vec![0.0; h];
            let mut u = vec![0.0; h];
            let mut n = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for k in 0..h {
                r[k] = sigmoid(gi[k] + gh[k]);
                u[k] = sigmoid(gi[h + k] + gh[h + k]);
                n[k] = (gi[2 * h + k] + r[k] * gh[2 * h + k]).tanh();
                h_new[k] = (1.0 - u[k]) * n[k] + u[k] * h_prev[k];
            }
            tr.reset.push(r);
            tr.update.push(u);
            tr.cand.push(n);
            tr.hn.push(gh[2 * h..].to_vec());
            tr.hidden.push(h_new);
        }
        layers.push(tr);
    }
    let top = &layers.last().expect("at least one layer").hidden[steps];
    let mut delta = vec![0.0; layout.latent_dim];
    affine(
        &params[layout.w_out..layout.w_out + layout.latent_dim * h],
        &params[layout.b_out..layout.b_out + layout.latent_dim],
        top,
        &mut delta,
    );
    ForwardTrace { delta, layers }
}

/// Gradient of a loss with respect to every parameter, given the loss
/// gradient `d_delta` at the read-out. Inputs receive no gradient.
pub(crate) fn backward(
    layout: &Layout,
    params: &[f64],
    inputs: &[Vec<f64>],
    trace: &ForwardTrace,
    d_delta: &[f64],
) -> Vec<f64> {
    let h = layout.hidden;
    let steps = inputs.len();
    let mut grad = vec![0.0; layout.len];
    let top = &trace.layers.last().expect("at least one layer").hidden[steps];

    outer_acc(
        &mut grad[layout.w_out..layout.w_out + layout.latent_dim * h],
        d_delta,
        top,
    );
    for (g, d) in grad[layout.b_out..layout.b_out + layout.latent_dim]
        .iter_mut()
        .zip(d_delta)
    {
        *g += d;
    }

    // Gradient w.r.t. each layer's output hidden state at every step; only the
    // final step of the top layer receives a direct read-out gradient.
    let mut d_out: Vec<Vec<f64>> = vec![vec![0.0; h]; steps];
    affine_transpose_acc(
        &params[layout.w_out..layout.w_out + layout.latent_dim * h],
        d_delta,
        &mut d_out[steps - 1],
    );

    let mut d_gi = vec![0.0; 3 * h];
    let mut d_gh = vec![0.0; 3 * h];
    for l in (0..layout.num_layers()).rev() {
        let off = layout.layers[l];
        let tr = &trace.layers[l];
        let w_ih = &params[off.w_ih..off.w_ih + 3 * h * off.input];
        let w_hh = &params[off.w_hh..off.w_hh + 3 * h * h];
        let mut d_below: Vec<Vec<f64>> = if l > 0 { vec![vec![0.0; h]; steps] } else { Vec::new() };
        let mut d_h = vec![0.0; h];
        for t in (0..steps).rev() {
            for k in 0..h {
                d_h[k] += d_out[t][k];
            }
            let h_prev = &tr.hidden[t];
            let (r, u, n, hn) = (&tr.reset[t], &tr.update[t], &tr.cand[t], &tr.hn[t]);
            let mut d_h_prev = vec![0.0; h];
            for k in 0..h {
                let dn = d_h[k] * (1.0 - u[k]);
                let du = d_h[k] * (h_prev[k] - n[k]);
                d_h_prev[k] = d_h[k] * u[k];
                let d_pre_n = dn * (1.0 - n[k] * n[k]);
                let dr = d_pre_n * hn[k];
                let d_pre_r = dr * r[k] * (1.0 - r[k]);
                let d_pre_u = du * u[k] * (1.0 - u[k]);
                d_gi[k] = d_pre_r;
                d_gi[h + k] = d_pre_u;
                d_gi[2 * h + k] = d_pre_n;
                d_gh[k] = d_pre_r;
                d_gh[h + k] = d_pre_u;
                d_gh[2 * h + k] = d_pre_n * r[k];
            }
            let x: &[f64] = if l == 0 {
                &inputs[t]
            } else {
                &trace.layers[l - 1].hidden[t + 1]
            };
            outer_acc(&mut grad[off.w_ih..off.w_ih + 3 * h * off.input], &d_gi, x);
            outer_acc(&mut grad[off.w_hh..off.w_hh + 3 * h * h], &d_gh, h_prev);
            for (g, d) in grad[off.b_ih..off.b_ih + 3 * h].iter_mut().zip(&d_gi) {
                *g += d;
            }
            for (g, d) in grad[off.b_hh..off.b_hh + 3 * h].iter_mut().zip(&d_gh) {
                *g += d;
            }
            if l > 0 {
                affine_transpose_acc(w_ih, &d_gi, &mut d_below[t]);
            }
            affine_transpose_acc(w_hh, &d_gh, &mut d_h_prev);
            d_h = d_h_prev;
        }
        d_out = d_below;
    }
    grad
}
