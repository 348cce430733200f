//! Forward and backward kernels.
//!
//! Backward kernels accumulate (`+=`) into caller-provided gradient buffers
//! so several batches or time steps can share one buffer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, Tensor};
use crate::error::{Error, Result};

/// Geometry of a batched valid convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub c_in: usize,
    pub height: usize,
    pub width: usize,
    pub c_out: usize,
    pub kernel: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        self.height + 1 - self.kernel
    }

    pub fn out_width(&self) -> usize {
        self.width + 1 - self.kernel
    }

    fn check(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Self> {
        let (batch, c_in, height, width) = match *x.shape() {
            [c, h, w] => (1, c, h, w),
            [n, c, h, w] => (n, c, h, w),
            _ => return Err(Error::shape(format!("conv input must be [c,h,w] or [b,c,h,w], got {:?}", x.shape()))),
        };
        let [c_out, wc_in, kh, kw] = *w.shape() else {
            return Err(Error::shape(format!("conv weights must be 4-D, got {:?}", w.shape())));
        };
        if wc_in != c_in || kh != kw {
            return Err(Error::shape(format!(
                "weights {:?} incompatible with {c_in} input channels",
                w.shape()
            )));
        }
        if kh > height || kw > width {
            return Err(Error::shape(format!("{kh}x{kw} kernel does not fit {height}x{width} input")));
        }
        if b.shape() != [c_out] {
            return Err(Error::shape(format!("bias {:?} for {c_out} filters", b.shape())));
        }
        Ok(Self {
            batch,
            c_in,
            height,
            width,
            c_out,
            kernel: kh,
        })
    }
}

/// `W * x + b`: stride 1, no padding, cross-correlation.
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let g = ConvGeometry::check(x, w, b)?;
    let out = conv2d_forward_raw(&g, x.data(), w.data(), b.data());
    let mut shape = vec![g.c_out, g.out_height(), g.out_width()];
    if x.ndim() == 4 {
        shape.insert(0, g.batch);
    }
    Tensor::new(shape, out)
}

pub(crate) fn conv2d_forward_raw(g: &ConvGeometry, x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let (oh, ow, k) = (g.out_height(), g.out_width(), g.kernel);
    let in_plane = g.height * g.width;
    let out_plane = oh * ow;
    let mut out = vec![0.0; g.batch * g.c_out * out_plane];
    for n in 0..g.batch {
        let xs = &x[n * g.c_in * in_plane..(n + 1) * g.c_in * in_plane];
        for o in 0..g.c_out {
            let plane = &mut out[(n * g.c_out + o) * out_plane..(n * g.c_out + o + 1) * out_plane];
            plane.iter_mut().for_each(|v| *v = b[o]);
            for c in 0..g.c_in {
                let xc = &xs[c * in_plane..(c + 1) * in_plane];
                let wk = &w[(o * g.c_in + c) * k * k..(o * g.c_in + c + 1) * k * k];
                for ky in 0..k {
                    for kx in 0..k {
                        let weight = wk[ky * k + kx];
                        for y in 0..oh {
                            let src = &xc[(y + ky) * g.width + kx..(y + ky) * g.width + kx + ow];
                            axpy(weight, src, &mut plane[y * ow..(y + 1) * ow]);
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv2d_backward_raw(
    g: &ConvGeometry,
    x: &[f64],
    w: &[f64],
    grad_out: &[f64],
    dx: Option<&mut [f64]>,
    dw: &mut [f64],
    db: &mut [f64],
) {
    let (oh, ow, k) = (g.out_height(), g.out_width(), g.kernel);
    let in_plane = g.height * g.width;
    let out_plane = oh * ow;
    for o in 0..g.c_out {
        for n in 0..g.batch {
            let go = &grad_out[(n * g.c_out + o) * out_plane..(n * g.c_out + o + 1) * out_plane];
            db[o] += go.iter().sum::<f64>();
            for c in 0..g.c_in {
                let xc = &x[(n * g.c_in + c) * in_plane..(n * g.c_in + c + 1) * in_plane];
                let dwk = &mut dw[(o * g.c_in + c) * k * k..(o * g.c_in + c + 1) * k * k];
                for ky in 0..k {
                    for kx in 0..k {
                        let mut acc = 0.0;
                        for y in 0..oh {
                            let src = &xc[(y + ky) * g.width + kx..(y + ky) * g.width + kx + ow];
                            acc += dot(&go[y * ow..(y + 1) * ow], src);
                        }
                        dwk[ky * k + kx] += acc;
                    }
                }
            }
        }
    }
    if let Some(dx) = dx {
        for n in 0..g.batch {
            for o in 0..g.c_out {
                let go = &grad_out[(n * g.c_out + o) * out_plane..(n * g.c_out + o + 1) * out_plane];
                for c in 0..g.c_in {
                    let dxc = &mut dx[(n * g.c_in + c) * in_plane..(n * g.c_in + c + 1) * in_plane];
                    let wk = &w[(o * g.c_in + c) * k * k..(o * g.c_in + c + 1) * k * k];
                    for ky in 0..k {
                        for kx in 0..k {
                            let weight = wk[ky * k + kx];
                            for y in 0..oh {
                                let dst = &mut dxc[(y + ky) * g.width + kx..(y + ky) * g.width + kx + ow];
                                axpy(weight, &go[y * ow..(y + 1) * ow], dst);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward(x: &Tensor, w: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let b = Tensor::zeros(&[w.shape()[0]]);
    let g = ConvGeometry::check(x, w, &b)?;
    if grad_out.len() != g.batch * g.c_out * g.out_height() * g.out_width() {
        return Err(Error::shape("conv output gradient has the wrong size"));
    }
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[g.c_out]);
    conv2d_backward_raw(&g, x.data(), w.data(), grad_out.data(), Some(dx.data_mut()), dw.data_mut(), db.data_mut());
    Ok((dx, dw, db))
}

fn dense_dims(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    let (batch, n) = match *x.shape() {
        [n] => (1, n),
        [b, n] => (b, n),
        _ => return Err(Error::shape(format!("dense input must be [n] or [b,n], got {:?}", x.shape()))),
    };
    let [m, wn] = *w.shape() else {
        return Err(Error::shape(format!("dense weights must be 2-D, got {:?}", w.shape())));
    };
    if wn != n || b.shape() != [m] {
        return Err(Error::shape(format!(
            "dense weights {:?} / bias {:?} incompatible with input width {n}",
            w.shape(),
            b.shape()
        )));
    }
    Ok((batch, n, m))
}

/// `W x + b` for each row of `x`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (batch, n, m) = dense_dims(x, w, b)?;
    let out = dense_forward_raw(batch, n, m, x.data(), w.data(), b.data());
    let shape = if x.ndim() == 1 { vec![m] } else { vec![batch, m] };
    Tensor::new(shape, out)
}

pub(crate) fn dense_forward_raw(batch: usize, n: usize, m: usize, x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * m);
    for row in x.chunks_exact(n).take(batch) {
        for i in 0..m {
            out.push(dot(&w[i * n..(i + 1) * n], row) + b[i]);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward_raw(
    batch: usize,
    n: usize,
    m: usize,
    x: &[f64],
    w: &[f64],
    grad_out: &[f64],
    dx: Option<&mut [f64]>,
    dw: &mut [f64],
    db: &mut [f64],
) {
    for i in 0..m {
        let dwi = &mut dw[i * n..(i + 1) * n];
        for bidx in 0..batch {
            let delta = grad_out[bidx * m + i];
            db[i] += delta;
            if delta != 0.0 {
                axpy(delta, &x[bidx * n..(bidx + 1) * n], dwi);
            }
        }
    }
    if let Some(dx) = dx {
        for bidx in 0..batch {
            let dxb = &mut dx[bidx * n..(bidx + 1) * n];
            for i in 0..m {
                let delta = grad_out[bidx * m + i];
                if delta != 0.0 {
                    axpy(delta, &w[i * n..(i + 1) * n], dxb);
                }
            }
        }
    }
}

/// Gradients of [`dense_forward`]: `(dx, dW, db)` with `dW = δᵀ x`.
pub fn dense_backward(x: &Tensor, w: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let b = Tensor::zeros(&[w.shape()[0]]);
    let (batch, n, m) = dense_dims(x, w, &b)?;
    if grad_out.len() != batch * m {
        return Err(Error::shape("dense output gradient has the wrong size"));
    }
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[m]);
    dense_backward_raw(batch, n, m, x.data(), w.data(), grad_out.data(), Some(dx.data_mut()), dw.data_mut(), db.data_mut());
    Ok((dx, dw, db))
}

/// Element-wise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => y * (1.0 - y),
            ActivationKind::Tanh => 1.0 - y * y,
        }
    }
}

pub fn activation_forward(x: &Tensor, kind: ActivationKind) -> Tensor {
    let data = x.data().iter().map(|&v| kind.apply(v)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Input gradient given the forward output `y`.
pub fn activation_backward(y: &[f64], grad_out: &[f64], kind: ActivationKind) -> Vec<f64> {
    y.iter()
        .zip(grad_out)
        .map(|(&y, &g)| g * kind.derivative_from_output(y))
        .collect()
}

/// Softmax over the last dimension, max-shifted.
pub fn softmax(x: &Tensor) -> Tensor {
    let k = *x.shape().last().expect("non-empty shape");
    let mut data = x.data().to_vec();
    for row in data.chunks_exact_mut(k) {
        softmax_in_place(row);
    }
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Input gradient of softmax: `y ⊙ (g − ⟨g, y⟩)` per row.
pub fn softmax_backward(y: &[f64], grad_out: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    for (yr, gr) in y.chunks_exact(k).zip(grad_out.chunks_exact(k)) {
        let inner = dot(yr, gr);
        out.extend(yr.iter().zip(gr).map(|(y, g)| y * (g - inner)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. Returns the output and, in training mode, the applied
/// multiplier per element (0 or `1/(1-rate)`).
pub fn dropout_forward(
    x: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((Tensor::new(x.shape().to_vec(), data)?, Some(mask)))
}

/// Probability floor used by [`bce_loss`].
pub const PROB_CLAMP: f64 = 1e-12;

/// Cross-entropy of a probability vector against a class index.
pub fn bce_loss(probs: &[f64], target: usize) -> Result<f64> {
    let p = probs
        .get(target)
        .ok_or_else(|| Error::invalid(format!("target {target} out of {} classes", probs.len())))?;
    Ok(-p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln())
}

/// Mean softmax cross-entropy over rows of `logits` and its gradient with
/// respect to the logits, `(softmax − onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    let k = *logits.shape().last().expect("non-empty shape");
    let batch = logits.len() / k;
    if targets.len() != batch {
        return Err(Error::shape(format!("{} targets for {batch} rows", targets.len())));
    }
    let mut grad = logits.data().to_vec();
    let mut loss = 0.0;
    for (row, (&t, logit_row)) in grad.chunks_exact_mut(k).zip(targets.iter().zip(logits.data().chunks_exact(k))) {
        if t >= k {
            return Err(Error::invalid(format!("target {t} out of {k} classes")));
        }
        let max = logit_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logit_row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - logit_row[t];
        softmax_in_place(row);
        row[t] -= 1.0;
        row.iter_mut().for_each(|v| *v /= batch as f64);
    }
    Ok((loss / batch as f64, Tensor::new(logits.shape().to_vec(), grad)?))
}

/// Mean squared difference.
pub fn mse_loss(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::shape(format!("mse over {} and {} values", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// Gradient of [`mse_loss`] with respect to `x`.
pub fn mse_grad(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    x.iter().zip(y).map(|(a, b)| 2.0 * (a - b) / n).collect()
}

/// Gate weights of one LSTM layer. Rows are grouped by gate in the order
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[4m, n]`
    pub w_x: Tensor,
    /// `[4m, m]`
    pub w_h: Tensor,
    /// `[4m]`
    pub bias: Tensor,
}

impl LstmParams {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            w_x: Tensor::zeros(&[4 * m, n]),
            w_h: Tensor::zeros(&[4 * m, m]),
            bias: Tensor::zeros(&[4 * m]),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_x.shape()[1]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.shape()[1]
    }

    fn check(&self) -> Result<(usize, usize)> {
        let (n, m) = (self.input_size(), self.hidden_size());
        if self.w_x.shape() != [4 * m, n] || self.w_h.shape() != [4 * m, m] || self.bias.shape() != [4 * m] {
            return Err(Error::shape("inconsistent LSTM parameter shapes"));
        }
        Ok((n, m))
    }
}

/// Activations saved by the forward pass for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    batch: usize,
    steps: usize,
    n: usize,
    m: usize,
    xs: Vec<f64>,
    /// `[B, T+1, m]`, slot 0 holds the initial state.
    h: Vec<f64>,
    c: Vec<f64>,
    /// Activated gates `[B, T, 4m]`.
    gates: Vec<f64>,
}

/// Batched LSTM over `xs: [B, T, n]`; returns hidden states `[B, T, m]`.
pub fn lstm_forward_batched(
    xs: &Tensor,
    params: &LstmParams,
    h0: &[f64],
    c0: &[f64],
) -> Result<(Tensor, LstmCache)> {
    let (n, m) = params.check()?;
    let [batch, steps, xn] = *xs.shape() else {
        return Err(Error::shape(format!("lstm input must be [b,t,n], got {:?}", xs.shape())));
    };
    if xn != n {
        return Err(Error::shape(format!("lstm expects width {n}, got {xn}")));
    }
    if h0.len() != batch * m || c0.len() != batch * m {
        return Err(Error::shape("initial state size mismatch"));
    }
    let (wx, wh, bias) = (params.w_x.data(), params.w_h.data(), params.bias.data());
    let mut h = vec![0.0; batch * (steps + 1) * m];
    let mut c = vec![0.0; batch * (steps + 1) * m];
    let mut gates = vec![0.0; batch * steps * 4 * m];
    let mut out = vec![0.0; batch * steps * m];
    for b in 0..batch {
        let hb = b * (steps + 1) * m;
        h[hb..hb + m].copy_from_slice(&h0[b * m..(b + 1) * m]);
        c[hb..hb + m].copy_from_slice(&c0[b * m..(b + 1) * m]);
        for t in 0..steps {
            let x_t = &xs.data()[(b * steps + t) * n..(b * steps + t + 1) * n];
            let g = &mut gates[(b * steps + t) * 4 * m..(b * steps + t + 1) * 4 * m];
            let (prev, next) = h.split_at_mut(hb + (t + 1) * m);
            let h_prev = &prev[hb + t * m..];
            for r in 0..4 * m {
                g[r] = bias[r] + dot(&wx[r * n..(r + 1) * n], x_t) + dot(&wh[r * m..(r + 1) * m], h_prev);
            }
            let h_next = &mut next[..m];
            for j in 0..m {
                let i_g = sigmoid(g[j]);
                let f_g = sigmoid(g[m + j]);
                let c_g = g[2 * m + j].tanh();
                let o_g = sigmoid(g[3 * m + j]);
                g[j] = i_g;
                g[m + j] = f_g;
                g[2 * m + j] = c_g;
                g[3 * m + j] = o_g;
                let c_new = f_g * c[hb + t * m + j] + i_g * c_g;
                c[hb + (t + 1) * m + j] = c_new;
                h_next[j] = o_g * c_new.tanh();
            }
            out[(b * steps + t) * m..(b * steps + t + 1) * m].copy_from_slice(h_next);
        }
    }
    let cache = LstmCache {
        batch,
        steps,
        n,
        m,
        xs: xs.data().to_vec(),
        h,
        c,
        gates,
    };
    Ok((Tensor::new(vec![batch, steps, m], out)?, cache))
}

/// Input and initial-state gradients of an LSTM pass.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    /// `[B, T, n]`
    pub dxs: Vec<f64>,
    pub dh0: Vec<f64>,
    pub dc0: Vec<f64>,
}

/// Backpropagation through time. `grad_hs` is the loss gradient with respect
/// to every hidden output `[B, T, m]`; parameter gradients are accumulated
/// into the gradient buffers of `params`.
pub fn lstm_backward(cache: &LstmCache, params: &mut LstmParams, grad_hs: &[f64]) -> Result<LstmGrads> {
    let LstmCache { batch, steps, n, m, .. } = *cache;
    if grad_hs.len() != batch * steps * m {
        return Err(Error::shape("lstm output gradient has the wrong size"));
    }
    let wx = params.w_x.data().to_vec();
    let wh = params.w_h.data().to_vec();
    let mut dxs = vec![0.0; batch * steps * n];
    let mut dh0 = vec![0.0; batch * m];
    let mut dc0 = vec![0.0; batch * m];
    let mut dz = vec![0.0; 4 * m];
    let mut dh = vec![0.0; m];
    let mut dc = vec![0.0; m];
    let mut dh_prev = vec![0.0; m];
    {
        let dwx = params.w_x.grad_mut();
        for b in 0..batch {
            let hb = b * (steps + 1) * m;
            dh.iter_mut().for_each(|v| *v = 0.0);
            dc.iter_mut().for_each(|v| *v = 0.0);
            for t in (0..steps).rev() {
                for j in 0..m {
                    dh[j] += grad_hs[(b * steps + t) * m + j];
                }
                let g = &cache.gates[(b * steps + t) * 4 * m..(b * steps + t + 1) * 4 * m];
                let c_prev = &cache.c[hb + t * m..hb + (t + 1) * m];
                let c_cur = &cache.c[hb + (t + 1) * m..hb + (t + 2) * m];
                for j in 0..m {
                    let (i_g, f_g, c_g, o_g) = (g[j], g[m + j], g[2 * m + j], g[3 * m + j]);
                    let tc = c_cur[j].tanh();
                    let d_o = dh[j] * tc;
                    let dcj = dc[j] + dh[j] * o_g * (1.0 - tc * tc);
                    dz[j] = dcj * c_g * i_g * (1.0 - i_g);
                    dz[m + j] = dcj * c_prev[j] * f_g * (1.0 - f_g);
                    dz[2 * m + j] = dcj * i_g * (1.0 - c_g * c_g);
                    dz[3 * m + j] = d_o * o_g * (1.0 - o_g);
                    dc[j] = dcj * f_g;
                }
                let x_t = &cache.xs[(b * steps + t) * n..(b * steps + t + 1) * n];
                let dx_t = &mut dxs[(b * steps + t) * n..(b * steps + t + 1) * n];
                dh_prev.iter_mut().for_each(|v| *v = 0.0);
                for r in 0..4 * m {
                    let d = dz[r];
                    if d == 0.0 {
                        continue;
                    }
                    axpy(d, x_t, &mut dwx[r * n..(r + 1) * n]);
                    axpy(d, &wx[r * n..(r + 1) * n], dx_t);
                    axpy(d, &wh[r * m..(r + 1) * m], &mut dh_prev);
                }
                // Recurrent-weight and bias gradients use the same dz.
                accumulate_recurrent(&mut params.w_h, &mut params.bias, &dz, &cache.h[hb + t * m..hb + (t + 1) * m], m);
                dh.copy_from_slice(&dh_prev);
            }
            dh0[b * m..(b + 1) * m].copy_from_slice(&dh);
            dc0[b * m..(b + 1) * m].copy_from_slice(&dc);
        }
    }
    Ok(LstmGrads { dxs, dh0, dc0 })
}

fn accumulate_recurrent(w_h: &mut Tensor, bias: &mut Tensor, dz: &[f64], h_prev: &[f64], m: usize) {
    let dwh = w_h.grad_mut();
    for (r, &d) in dz.iter().enumerate() {
        if d != 0.0 {
            axpy(d, h_prev, &mut dwh[r * m..(r + 1) * m]);
        }
    }
    for (acc, &d) in bias.grad_mut().iter_mut().zip(dz) {
        *acc += d;
    }
}

/// Unbatched LSTM over a sequence of input vectors.
pub fn lstm_forward(xs: &[Tensor], params: &LstmParams, h0: &Tensor, c0: &Tensor) -> Result<Vec<Tensor>> {
    if xs.is_empty() {
        return Err(Error::invalid("empty input sequence"));
    }
    let rows: Vec<&[f64]> = xs.iter().map(Tensor::data).collect();
    let seq = Tensor::stack(&rows, &[params.input_size()])?.reshape(vec![1, xs.len(), params.input_size()])?;
    let (hs, _) = lstm_forward_batched(&seq, params, h0.data(), c0.data())?;
    let m = params.hidden_size();
    Ok(hs.data().chunks_exact(m).map(|h| Tensor::vector(h.to_vec())).collect())
}
