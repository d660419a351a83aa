//! Layer implementations and the assembled network.
//!
//! Activations live in `Batch` buffers laid out [example][channel][pos].
//! Forward passes record a `Tape` of intermediates that the backward pass
//! consumes. Everything is sequential f64, so results depend only on the
//! seeds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CnnConfig, ConvBlockCfg};
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// A batch of multichannel 1-D activations.
#[derive(Debug, Clone)]
pub struct Batch {
    pub n: usize,
    pub c: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Batch {
    pub fn zeros(n: usize, c: usize, w: usize) -> Self {
        Self { n, c, w, data: vec![0.0; n * c * w] }
    }

    #[inline]
    pub fn row(&self, ex: usize, ch: usize) -> &[f64] {
        let base = (ex * self.c + ch) * self.w;
        &self.data[base..base + self.w]
    }

    #[inline]
    pub fn row_mut(&mut self, ex: usize, ch: usize) -> &mut [f64] {
        let base = (ex * self.c + ch) * self.w;
        &mut self.data[base..base + self.w]
    }
}

/// Value/gradient/Adam-state bundle for one parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

impl ParamTensor {
    fn new(v: Vec<f64>) -> Self {
        let n = v.len();
        Self { v, g: vec![0.0; n], m1: vec![0.0; n], m2: vec![0.0; n] }
    }

    fn zero_grad(&mut self) {
        self.g.iter_mut().for_each(|g| *g = 0.0);
    }

    fn adam_step(&mut self, lr: f64, step: usize) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let c1 = 1.0 - B1.powi(step as i32);
        let c2 = 1.0 - B2.powi(step as i32);
        for i in 0..self.v.len() {
            let g = self.g[i];
            self.m1[i] = B1 * self.m1[i] + (1.0 - B1) * g;
            self.m2[i] = B2 * self.m2[i] + (1.0 - B2) * g * g;
            let mh = self.m1[i] / c1;
            let vh = self.m2[i] / c2;
            self.v[i] -= lr * mh / (vh.sqrt() + EPS);
        }
    }
}

fn init_uniform(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Dot product with four fixed accumulator lanes. The lane layout pins the
/// summation order, so results are reproducible while the loop still
/// vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let mut lanes = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = c * 4;
        lanes[0] += a[i] * b[i];
        lanes[1] += a[i + 1] * b[i + 1];
        lanes[2] += a[i + 2] * b[i + 2];
        lanes[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += a[i] * b[i];
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

#[derive(Debug, Clone)]
struct Conv1d {
    in_c: usize,
    out_c: usize,
    k: usize,
    weight: ParamTensor, // [out_c][in_c][k]
    bias: ParamTensor,   // [out_c]
}

impl Conv1d {
    fn new(rng: &mut ChaCha8Rng, in_c: usize, out_c: usize, k: usize) -> Self {
        let fan_in = in_c * k;
        Self {
            in_c,
            out_c,
            k,
            weight: ParamTensor::new(init_uniform(rng, out_c * in_c * k, fan_in)),
            bias: ParamTensor::new(init_uniform(rng, out_c, fan_in)),
        }
    }

    fn out_w(&self, in_w: usize) -> usize {
        in_w + 1 - self.k
    }

    fn forward(&self, x: &Batch) -> Batch {
        let ow = self.out_w(x.w);
        let mut out = Batch::zeros(x.n, self.out_c, ow);
        for ex in 0..x.n {
            for o in 0..self.out_c {
                let bias = self.bias.v[o];
                let orow = out.row_mut(ex, o);
                orow.iter_mut().for_each(|v| *v = bias);
                for i in 0..self.in_c {
                    let wrow = &self.weight.v[(o * self.in_c + i) * self.k..][..self.k];
                    let xrow = x.row(ex, i);
                    // Shift-and-accumulate: each tap contributes one
                    // contiguous scaled copy of the input row.
                    for (k, &wk) in wrow.iter().enumerate() {
                        let xs = &xrow[k..k + ow];
                        for (ov, &xv) in orow.iter_mut().zip(xs) {
                            *ov += wk * xv;
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates weight/bias grads and returns the input gradient.
    fn backward(&mut self, x: &Batch, delta: &Batch) -> Batch {
        let ow = delta.w;
        let mut dx = Batch::zeros(x.n, x.c, x.w);
        for ex in 0..x.n {
            for o in 0..self.out_c {
                let drow = delta.row(ex, o);
                self.bias.g[o] += drow.iter().sum::<f64>();
                for i in 0..self.in_c {
                    let xrow = x.row(ex, i);
                    let widx = (o * self.in_c + i) * self.k;
                    for k in 0..self.k {
                        self.weight.g[widx + k] += dot(drow, &xrow[k..k + ow]);
                    }
                    let wrow = &self.weight.v[widx..widx + self.k];
                    let dxrow = dx.row_mut(ex, i);
                    for (k, &wk) in wrow.iter().enumerate() {
                        let dst = &mut dxrow[k..k + ow];
                        for (dv, &d) in dst.iter_mut().zip(drow) {
                            *dv += wk * d;
                        }
                    }
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone)]
struct BatchNorm1d {
    c: usize,
    gamma: ParamTensor,
    beta: ParamTensor,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    eps: f64,
    momentum: f64,
}

struct BnTape {
    xhat: Batch,
    invstd: Vec<f64>,
}

impl BatchNorm1d {
    fn new(c: usize) -> Self {
        Self {
            c,
            gamma: ParamTensor::new(vec![1.0; c]),
            beta: ParamTensor::new(vec![0.0; c]),
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    fn forward_train(&mut self, x: &Batch, update_running: bool) -> (Batch, BnTape) {
        let m = (x.n * x.w) as f64;
        let mut out = Batch::zeros(x.n, x.c, x.w);
        let mut xhat = Batch::zeros(x.n, x.c, x.w);
        let mut invstd = vec![0.0; self.c];
        for ch in 0..self.c {
            let mut sum = 0.0;
            for ex in 0..x.n {
                sum += x.row(ex, ch).iter().sum::<f64>();
            }
            let mean = sum / m;
            let mut ss = 0.0;
            for ex in 0..x.n {
                for &v in x.row(ex, ch) {
                    let d = v - mean;
                    ss += d * d;
                }
            }
            let var = ss / m;
            let istd = 1.0 / (var + self.eps).sqrt();
            invstd[ch] = istd;
            let (g, b) = (self.gamma.v[ch], self.beta.v[ch]);
            for ex in 0..x.n {
                let xr = x.row(ex, ch);
                let base = (ex * x.c + ch) * x.w;
                for (p, &v) in xr.iter().enumerate() {
                    let xh = (v - mean) * istd;
                    xhat.data[base + p] = xh;
                    out.data[base + p] = g * xh + b;
                }
            }
            if update_running {
                let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
                self.running_mean[ch] =
                    (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean;
                self.running_var[ch] =
                    (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased;
            }
        }
        (out, BnTape { xhat, invstd })
    }

    fn forward_eval(&self, x: &Batch) -> Batch {
        let mut out = Batch::zeros(x.n, x.c, x.w);
        for ch in 0..self.c {
            let istd = 1.0 / (self.running_var[ch] + self.eps).sqrt();
            let mean = self.running_mean[ch];
            let (g, b) = (self.gamma.v[ch], self.beta.v[ch]);
            for ex in 0..x.n {
                let base = (ex * x.c + ch) * x.w;
                for (p, &v) in x.row(ex, ch).iter().enumerate() {
                    out.data[base + p] = g * (v - mean) * istd + b;
                }
            }
        }
        out
    }

    fn backward(&mut self, tape: &BnTape, delta: &Batch) -> Batch {
        let m = (delta.n * delta.w) as f64;
        let mut dx = Batch::zeros(delta.n, delta.c, delta.w);
        for ch in 0..self.c {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for ex in 0..delta.n {
                let dr = delta.row(ex, ch);
                let xh = tape.xhat.row(ex, ch);
                for p in 0..delta.w {
                    sum_dy += dr[p];
                    sum_dy_xhat += dr[p] * xh[p];
                }
            }
            self.beta.g[ch] += sum_dy;
            self.gamma.g[ch] += sum_dy_xhat;
            let coeff = self.gamma.v[ch] * tape.invstd[ch];
            for ex in 0..delta.n {
                let dr = delta.row(ex, ch);
                let xh = tape.xhat.row(ex, ch);
                let base = (ex * delta.c + ch) * delta.w;
                for p in 0..delta.w {
                    dx.data[base + p] =
                        coeff * (dr[p] - sum_dy / m - xh[p] * sum_dy_xhat / m);
                }
            }
        }
        dx
    }
}

fn leaky_forward(x: &Batch, slope: f64) -> Batch {
    let mut out = x.clone();
    for v in out.data.iter_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    out
}

/// Backward through leaky ReLU given the pre-activation values.
fn leaky_backward(pre: &[f64], delta: &mut [f64], slope: f64) {
    for (d, &p) in delta.iter_mut().zip(pre.iter()) {
        if p < 0.0 {
            *d *= slope;
        }
    }
}

fn maxpool_forward(x: &Batch, pw: usize) -> (Batch, Vec<usize>) {
    let ow = x.w / pw;
    let mut out = Batch::zeros(x.n, x.c, ow);
    let mut argmax = vec![0usize; x.n * x.c * ow];
    for ex in 0..x.n {
        for ch in 0..x.c {
            let xr = x.row(ex, ch);
            let base = (ex * x.c + ch) * ow;
            for p in 0..ow {
                let mut best = xr[p * pw];
                let mut best_k = 0usize;
                for k in 1..pw {
                    let v = xr[p * pw + k];
                    if v > best {
                        best = v;
                        best_k = k;
                    }
                }
                out.data[base + p] = best;
                argmax[base + p] = p * pw + best_k;
            }
        }
    }
    (out, argmax)
}

fn maxpool_backward(delta: &Batch, argmax: &[usize], in_w: usize) -> Batch {
    let mut dx = Batch::zeros(delta.n, delta.c, in_w);
    for ex in 0..delta.n {
        for ch in 0..delta.c {
            let dr = delta.row(ex, ch);
            let base = (ex * delta.c + ch) * delta.w;
            let dst = dx.row_mut(ex, ch);
            for p in 0..delta.w {
                dst[argmax[base + p]] += dr[p];
            }
        }
    }
    dx
}

#[derive(Debug, Clone)]
struct Linear {
    in_dim: usize,
    out_dim: usize,
    weight: ParamTensor, // [out][in]
    bias: ParamTensor,
}

impl Linear {
    fn new(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: ParamTensor::new(init_uniform(rng, out_dim * in_dim, in_dim)),
            bias: ParamTensor::new(init_uniform(rng, out_dim, in_dim)),
        }
    }

    /// x is [n][in_dim] flat; returns [n][out_dim] flat.
    fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * self.out_dim];
        for ex in 0..n {
            let xr = &x[ex * self.in_dim..(ex + 1) * self.in_dim];
            let orow = &mut out[ex * self.out_dim..(ex + 1) * self.out_dim];
            for o in 0..self.out_dim {
                let wr = &self.weight.v[o * self.in_dim..(o + 1) * self.in_dim];
                orow[o] = self.bias.v[o] + dot(wr, xr);
            }
        }
        out
    }

    fn backward(&mut self, x: &[f64], delta: &[f64], n: usize) -> Vec<f64> {
        let mut dx = vec![0.0; n * self.in_dim];
        for ex in 0..n {
            let xr = &x[ex * self.in_dim..(ex + 1) * self.in_dim];
            let dr = &delta[ex * self.out_dim..(ex + 1) * self.out_dim];
            let dxr = &mut dx[ex * self.in_dim..(ex + 1) * self.in_dim];
            for o in 0..self.out_dim {
                let d = dr[o];
                self.bias.g[o] += d;
                let wg = &mut self.weight.g[o * self.in_dim..(o + 1) * self.in_dim];
                let wr = &self.weight.v[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    wg[i] += d * xr[i];
                    dxr[i] += wr[i] * d;
                }
            }
        }
        dx
    }
}

/// Everything the backward pass needs from one forward pass.
pub struct Tape {
    conv_inputs: Vec<Batch>,
    bn_tapes: Vec<BnTape>,
    bn_outs: Vec<Batch>,    // pre-leaky
    pool_argmax: Vec<Vec<usize>>,
    pool_in_w: Vec<usize>,
    fc_inputs: Vec<Vec<f64>>,   // input to each fc linear
    fc_lin_outs: Vec<Vec<f64>>, // pre-dropout
    fc_masks: Vec<Option<Vec<f64>>>,
    final_input: Vec<f64>,
    n: usize,
}

/// The assembled CNN.
#[derive(Debug, Clone)]
pub struct Network {
    pub cfg: CnnConfig,
    pub input_len: usize,
    conv: Vec<Conv1d>,
    bns: Vec<BatchNorm1d>,
    pools: Vec<usize>,
    fcs: Vec<Linear>,
    final_fc: Linear,
    flat_dim: usize,
}

impl Network {
    /// Build with fan-in-scaled uniform init from the config seed.
    pub fn new(cfg: &CnnConfig, input_len: usize) -> Result<Self> {
        cfg.validate_structure()?;
        let mut rng = rng_from(cfg.seed, &[0x6e65_74]);
        let mut conv = Vec::new();
        let mut bns = Vec::new();
        let mut pools = Vec::new();
        let mut c = 2usize; // I and Q rows enter as two channels
        let mut w = input_len;
        for (i, b) in cfg.conv_blocks.iter().enumerate() {
            if w < b.kernel_w {
                return Err(Error::validation(format!(
                    "conv block {i}: width {w} shorter than kernel {}",
                    b.kernel_w
                )));
            }
            conv.push(Conv1d::new(&mut rng, c, b.out_channels, b.kernel_w));
            bns.push(BatchNorm1d::new(b.out_channels));
            pools.push(b.pool_w);
            w = w + 1 - b.kernel_w;
            if w / b.pool_w == 0 {
                return Err(Error::validation(format!(
                    "conv block {i}: width {w} collapses to zero after pool {}",
                    b.pool_w
                )));
            }
            w /= b.pool_w;
            c = b.out_channels;
        }
        let flat_dim = c * w;
        let mut fcs = Vec::new();
        let mut d = flat_dim;
        for &width in &cfg.fc_widths {
            fcs.push(Linear::new(&mut rng, d, width));
            d = width;
        }
        let final_fc = Linear::new(&mut rng, d, cfg.num_classes);
        Ok(Self { cfg: cfg.clone(), input_len, conv, bns, pools, fcs, final_fc, flat_dim })
    }

    pub fn flat_dim(&self) -> usize {
        self.flat_dim
    }

    /// Training-mode forward: batch statistics in the norm layers and, when
    /// a generator is supplied and dropout_p > 0, inverted dropout after
    /// each fully connected layer.
    pub fn forward_train(
        &mut self,
        x: &Batch,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
        update_running: bool,
    ) -> (Vec<f64>, Tape) {
        assert_eq!(x.c, 2, "expected 2 input rows");
        assert_eq!(x.w, self.input_len, "expected input length {}", self.input_len);
        let n = x.n;
        let mut conv_inputs = Vec::new();
        let mut bn_tapes = Vec::new();
        let mut bn_outs = Vec::new();
        let mut pool_argmax = Vec::new();
        let mut pool_in_w = Vec::new();

        let mut cur = x.clone();
        let slope = self.cfg.leaky_slope;
        for b in 0..self.conv.len() {
            let z = self.conv[b].forward(&cur);
            conv_inputs.push(cur);
            let (bn_out, tape) = self.bns[b].forward_train(&z, update_running);
            bn_tapes.push(tape);
            let act = leaky_forward(&bn_out, slope);
            bn_outs.push(bn_out);
            pool_in_w.push(act.w);
            let (pooled, idx) = maxpool_forward(&act, self.pools[b]);
            pool_argmax.push(idx);
            cur = pooled;
        }

        let mut flat = cur.data;
        let p = self.cfg.dropout_p;
        let mut fc_inputs = Vec::new();
        let mut fc_lin_outs = Vec::new();
        let mut fc_masks = Vec::new();
        for fc in self.fcs.iter() {
            let lin = fc.forward(&flat, n);
            fc_inputs.push(flat);
            let mask = match (&mut dropout_rng, p > 0.0) {
                (Some(rng), true) => {
                    let keep = 1.0 / (1.0 - p);
                    Some(
                        (0..lin.len())
                            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                            .collect::<Vec<f64>>(),
                    )
                }
                _ => None,
            };
            let mut dropped = lin.clone();
            if let Some(m) = &mask {
                dropped.iter_mut().zip(m.iter()).for_each(|(v, &s)| *v *= s);
            }
            fc_lin_outs.push(lin);
            fc_masks.push(mask);
            for v in dropped.iter_mut() {
                if *v < 0.0 {
                    *v *= slope;
                }
            }
            flat = dropped;
        }
        let logits = self.final_fc.forward(&flat, n);
        let tape = Tape {
            conv_inputs,
            bn_tapes,
            bn_outs,
            pool_argmax,
            pool_in_w,
            fc_inputs,
            fc_lin_outs,
            fc_masks,
            final_input: flat,
            n,
        };
        (logits, tape)
    }

    /// Inference-mode forward: running statistics, no dropout.
    pub fn forward_eval(&self, x: &Batch) -> Vec<f64> {
        assert_eq!(x.c, 2);
        assert_eq!(x.w, self.input_len);
        let n = x.n;
        let slope = self.cfg.leaky_slope;
        let mut cur = x.clone();
        for b in 0..self.conv.len() {
            let z = self.conv[b].forward(&cur);
            let bn_out = self.bns[b].forward_eval(&z);
            let act = leaky_forward(&bn_out, slope);
            let (pooled, _) = maxpool_forward(&act, self.pools[b]);
            cur = pooled;
        }
        let mut flat = cur.data;
        for fc in self.fcs.iter() {
            let mut lin = fc.forward(&flat, n);
            for v in lin.iter_mut() {
                if *v < 0.0 {
                    *v *= slope;
                }
            }
            flat = lin;
        }
        self.final_fc.forward(&flat, n)
    }

    /// Accumulate parameter gradients for a batch; `dlogits` is the loss
    /// gradient at the final layer.
    pub fn backward(&mut self, tape: &Tape, dlogits: &[f64]) {
        let n = tape.n;
        let slope = self.cfg.leaky_slope;
        let mut delta = self.final_fc.backward(&tape.final_input, dlogits, n);
        for (b, fc) in self.fcs.iter_mut().enumerate().rev() {
            // Through leaky ReLU on the post-dropout values; the dropout
            // mask is non-negative so the dropped value's sign matches the
            // linear output's sign wherever the mask keeps it.
            let pre: Vec<f64> = match &tape.fc_masks[b] {
                Some(m) => tape.fc_lin_outs[b]
                    .iter()
                    .zip(m.iter())
                    .map(|(&v, &s)| v * s)
                    .collect(),
                None => tape.fc_lin_outs[b].clone(),
            };
            leaky_backward(&pre, &mut delta, slope);
            if let Some(m) = &tape.fc_masks[b] {
                delta.iter_mut().zip(m.iter()).for_each(|(d, &s)| *d *= s);
            }
            delta = fc.backward(&tape.fc_inputs[b], &delta, n);
        }

        let last = self.conv.len() - 1;
        let last_c = self.cfg.conv_blocks[last].out_channels;
        let last_w = self.flat_dim / last_c;
        let mut dbatch = Batch { n, c: last_c, w: last_w, data: delta };
        for b in (0..self.conv.len()).rev() {
            let mut d_act = maxpool_backward(&dbatch, &tape.pool_argmax[b], tape.pool_in_w[b]);
            leaky_backward(&tape.bn_outs[b].data, &mut d_act.data, slope);
            let d_bn = self.bns[b].backward(&tape.bn_tapes[b], &d_act);
            dbatch = self.conv[b].backward(&tape.conv_inputs[b], &d_bn);
        }
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(|p| p.zero_grad());
    }

    pub fn adam_step(&mut self, lr: f64, step: usize) {
        self.visit_params(|p| p.adam_step(lr, step));
    }

    pub(crate) fn visit_params<F: FnMut(&mut ParamTensor)>(&mut self, mut f: F) {
        for conv in self.conv.iter_mut() {
            f(&mut conv.weight);
            f(&mut conv.bias);
        }
        for bn in self.bns.iter_mut() {
            f(&mut bn.gamma);
            f(&mut bn.beta);
        }
        for fc in self.fcs.iter_mut() {
            f(&mut fc.weight);
            f(&mut fc.bias);
        }
        f(&mut self.final_fc.weight);
        f(&mut self.final_fc.bias);
    }

    /// Named views over every parameter tensor, for diagnostics.
    pub(crate) fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.conv.len() {
            names.push(format!("conv{i}.weight"));
            names.push(format!("conv{i}.bias"));
        }
        for i in 0..self.bns.len() {
            names.push(format!("bn{i}.gamma"));
            names.push(format!("bn{i}.beta"));
        }
        for i in 0..self.fcs.len() {
            names.push(format!("fc{i}.weight"));
            names.push(format!("fc{i}.bias"));
        }
        names.push("final.weight".into());
        names.push("final.bias".into());
        names
    }

    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            format_version: CHECKPOINT_VERSION,
            cnn_config: self.cfg.clone(),
            input_len: self.input_len,
            conv_weights: self.conv.iter().map(|c| c.weight.v.clone()).collect(),
            conv_biases: self.conv.iter().map(|c| c.bias.v.clone()).collect(),
            bn_gammas: self.bns.iter().map(|b| b.gamma.v.clone()).collect(),
            bn_betas: self.bns.iter().map(|b| b.beta.v.clone()).collect(),
            bn_running_means: self.bns.iter().map(|b| b.running_mean.clone()).collect(),
            bn_running_vars: self.bns.iter().map(|b| b.running_var.clone()).collect(),
            fc_weights: self.fcs.iter().map(|l| l.weight.v.clone()).collect(),
            fc_biases: self.fcs.iter().map(|l| l.bias.v.clone()).collect(),
            final_weight: self.final_fc.weight.v.clone(),
            final_bias: self.final_fc.bias.v.clone(),
        }
    }

    pub fn from_checkpoint(ck: &NetworkCheckpoint) -> Result<Self> {
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::validation(format!(
                "unsupported checkpoint version {}",
                ck.format_version
            )));
        }
        let mut net = Network::new(&ck.cnn_config, ck.input_len)?;
        let restore = |dst: &mut Vec<f64>, src: &Vec<f64>, what: &str| -> Result<()> {
            if dst.len() != src.len() {
                return Err(Error::data(format!(
                    "checkpoint {what} length {} does not match architecture {}",
                    src.len(),
                    dst.len()
                )));
            }
            dst.clone_from(src);
            Ok(())
        };
        for (i, conv) in net.conv.iter_mut().enumerate() {
            restore(&mut conv.weight.v, &ck.conv_weights[i], "conv weight")?;
            restore(&mut conv.bias.v, &ck.conv_biases[i], "conv bias")?;
        }
        for (i, bn) in net.bns.iter_mut().enumerate() {
            restore(&mut bn.gamma.v, &ck.bn_gammas[i], "bn gamma")?;
            restore(&mut bn.beta.v, &ck.bn_betas[i], "bn beta")?;
            restore(&mut bn.running_mean, &ck.bn_running_means[i], "bn mean")?;
            restore(&mut bn.running_var, &ck.bn_running_vars[i], "bn var")?;
        }
        for (i, fc) in net.fcs.iter_mut().enumerate() {
            restore(&mut fc.weight.v, &ck.fc_weights[i], "fc weight")?;
            restore(&mut fc.bias.v, &ck.fc_biases[i], "fc bias")?;
        }
        restore(&mut net.final_fc.weight.v, &ck.final_weight, "final weight")?;
        restore(&mut net.final_fc.bias.v, &ck.final_bias, "final bias")?;
        Ok(net)
    }

    /// Bitwise parameter comparison, for reproducibility checks.
    pub fn params_bit_equal(a: &mut Network, b: &mut Network) -> bool {
        let mut va = Vec::new();
        a.visit_params(|p| va.extend(p.v.iter().map(|x| x.to_bits())));
        let mut vb = Vec::new();
        b.visit_params(|p| vb.extend(p.v.iter().map(|x| x.to_bits())));
        va == vb
            && a.bns.iter().zip(b.bns.iter()).all(|(x, y)| {
                x.running_mean == y.running_mean && x.running_var == y.running_var
            })
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing serialized model: config, parameters, and batch-norm
/// running statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format_version: u32,
    pub cnn_config: CnnConfig,
    pub input_len: usize,
    pub conv_weights: Vec<Vec<f64>>,
    pub conv_biases: Vec<Vec<f64>>,
    pub bn_gammas: Vec<Vec<f64>>,
    pub bn_betas: Vec<Vec<f64>>,
    pub bn_running_means: Vec<Vec<f64>>,
    pub bn_running_vars: Vec<Vec<f64>>,
    pub fc_weights: Vec<Vec<f64>>,
    pub fc_biases: Vec<Vec<f64>>,
    pub final_weight: Vec<f64>,
    pub final_bias: Vec<f64>,
}

/// Tiny two-block architecture for gradient checking.
pub fn tiny_config(num_classes: usize, seed: u64) -> CnnConfig {
    CnnConfig {
        conv_blocks: vec![
            ConvBlockCfg { out_channels: 2, kernel_h: 2, kernel_w: 5, pool_w: 2 },
            ConvBlockCfg { out_channels: 2, kernel_h: 1, kernel_w: 3, pool_w: 2 },
        ],
        fc_widths: vec![8],
        dropout_p: 0.0,
        leaky_slope: 0.1,
        num_classes,
        seed,
    }
}
