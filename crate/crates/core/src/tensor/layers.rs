//! Layer specifications, layer state and the sequential container.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{
    self, conv2d_backward_raw, conv2d_forward_raw, dense_backward_raw, dense_forward_raw, ConvGeometry, LstmCache,
    LstmParams,
};
pub use super::ops::{ActivationKind, Mode};
use super::Tensor;
use crate::error::{Error, Result};

/// Declarative description of one layer. Shapes below are per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `[c, h, w] -> [filters, h + 2p - k + 1, w + 2p - k + 1]`
    Conv2d { filters: usize, kernel: usize, padding: usize },
    /// `[n] -> [units]`
    Dense { units: usize },
    /// `[t, n] -> [t, units]`, or `[units]` (last step) without `return_sequences`.
    Lstm { units: usize, return_sequences: bool },
    Dropout { rate: f64 },
    Activation { function: ActivationKind },
    /// Softmax over a vector.
    Softmax,
    Flatten,
}

impl LayerSpec {
    pub fn conv3x3(filters: usize) -> Self {
        LayerSpec::Conv2d {
            filters,
            kernel: 3,
            padding: 0,
        }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense { units }
    }

    pub fn act(function: ActivationKind) -> Self {
        LayerSpec::Activation { function }
    }

    /// Output shape for a given input shape, or the reason it is invalid.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |msg: String| Err(Error::shape(format!("{self:?}: {msg}")));
        match *self {
            LayerSpec::Conv2d {
                filters,
                kernel,
                padding,
            } => {
                let [_, h, w] = *input else {
                    return bad(format!("needs [c,h,w] input, got {input:?}"));
                };
                if filters == 0 || kernel == 0 {
                    return bad("filters and kernel must be positive".into());
                }
                if h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return bad(format!("kernel does not fit {h}x{w} input"));
                }
                Ok(vec![filters, h + 2 * padding + 1 - kernel, w + 2 * padding + 1 - kernel])
            }
            LayerSpec::Dense { units } => {
                if input.len() != 1 {
                    return bad(format!("needs a flat input, got {input:?}"));
                }
                if units == 0 {
                    return bad("units must be positive".into());
                }
                Ok(vec![units])
            }
            LayerSpec::Lstm {
                units,
                return_sequences,
            } => {
                let [t, _] = *input else {
                    return bad(format!("needs [t,n] input, got {input:?}"));
                };
                if units == 0 {
                    return bad("units must be positive".into());
                }
                Ok(if return_sequences { vec![t, units] } else { vec![units] })
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return bad(format!("rate {rate} outside [0, 1)"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
            LayerSpec::Softmax => {
                if input.len() != 1 {
                    return bad(format!("needs a vector input, got {input:?}"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

fn glorot(rng: &mut impl Rng, len: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-limit..limit)).collect()
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    geometry: ConvGeometry,
    padding: usize,
    pub weight: Tensor,
    pub bias: Tensor,
    input: Option<Vec<f64>>,
}

impl Conv2d {
    fn padded(&self) -> (usize, usize) {
        (self.geometry.height, self.geometry.width)
    }

    /// Copy `[b, c, h, w]` into the zero-padded layout.
    fn pad(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let p = self.padding;
        if p == 0 {
            return x.to_vec();
        }
        let (ph, pw) = self.padded();
        let (h, w) = (ph - 2 * p, pw - 2 * p);
        let planes = batch * self.geometry.c_in;
        let mut out = vec![0.0; planes * ph * pw];
        for plane in 0..planes {
            for y in 0..h {
                let src = &x[(plane * h + y) * w..(plane * h + y + 1) * w];
                let start = (plane * ph + y + p) * pw + p;
                out[start..start + w].copy_from_slice(src);
            }
        }
        out
    }

    fn crop(&self, dx: Vec<f64>, batch: usize) -> Vec<f64> {
        let p = self.padding;
        if p == 0 {
            return dx;
        }
        let (ph, pw) = self.padded();
        let (h, w) = (ph - 2 * p, pw - 2 * p);
        let mut out = Vec::with_capacity(batch * self.geometry.c_in * h * w);
        for plane in 0..batch * self.geometry.c_in {
            for y in 0..h {
                let start = (plane * ph + y + p) * pw + p;
                out.extend_from_slice(&dx[start..start + w]);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    n: usize,
    m: usize,
    pub weight: Tensor,
    pub bias: Tensor,
    input: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Lstm {
    pub params: LstmParams,
    return_sequences: bool,
    cache: Option<LstmCache>,
}

#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    mask: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Activation {
    kind: ActivationKind,
    output: Option<Vec<f64>>,
}

/// A built layer with parameters and the cache of its last forward pass.
#[derive(Debug, Clone)]
pub enum Layer {
    Conv2d(Conv2d),
    Dense(Dense),
    Lstm(Lstm),
    Dropout(Dropout),
    Activation(Activation),
    Softmax { k: usize, output: Option<Vec<f64>> },
    Flatten,
}

impl Layer {
    /// Instantiate `spec` for per-sample `input` shape, drawing initial weights
    /// from `rng`.
    pub fn build(spec: &LayerSpec, input: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let out = spec.output_shape(input)?;
        Ok(match *spec {
            LayerSpec::Conv2d {
                filters,
                kernel,
                padding,
            } => {
                let c_in = input[0];
                let geometry = ConvGeometry {
                    batch: 0,
                    c_in,
                    height: input[1] + 2 * padding,
                    width: input[2] + 2 * padding,
                    c_out: filters,
                    kernel,
                };
                let len = filters * c_in * kernel * kernel;
                let w = glorot(rng, len, c_in * kernel * kernel, filters * kernel * kernel);
                Layer::Conv2d(Conv2d {
                    geometry,
                    padding,
                    weight: Tensor::new(vec![filters, c_in, kernel, kernel], w)?,
                    bias: Tensor::zeros(&[filters]),
                    input: None,
                })
            }
            LayerSpec::Dense { units } => {
                let n = input[0];
                Layer::Dense(Dense {
                    n,
                    m: units,
                    weight: Tensor::new(vec![units, n], glorot(rng, units * n, n, units))?,
                    bias: Tensor::zeros(&[units]),
                    input: None,
                })
            }
            LayerSpec::Lstm {
                units,
                return_sequences,
            } => {
                let n = input[1];
                let limit = 1.0 / ((n + units) as f64).sqrt();
                let mut params = LstmParams::zeros(n, units);
                for v in params.w_x.data_mut().iter_mut().chain(params.w_h.data_mut()) {
                    *v = rng.random_range(-limit..limit);
                }
                params.bias.data_mut()[units..2 * units].iter_mut().for_each(|b| *b = 1.0);
                Layer::Lstm(Lstm {
                    params,
                    return_sequences,
                    cache: None,
                })
            }
            LayerSpec::Dropout { rate } => Layer::Dropout(Dropout { rate, mask: None }),
            LayerSpec::Activation { function } => Layer::Activation(Activation {
                kind: function,
                output: None,
            }),
            LayerSpec::Softmax => Layer::Softmax { k: out[0], output: None },
            LayerSpec::Flatten => Layer::Flatten,
        })
    }

    /// Forward over a batch `[b, ...per-sample shape]`; `out_shape` is the
    /// per-sample output shape computed at build time.
    fn forward(&mut self, x: Tensor, out_shape: &[usize], mode: Mode, rng: &mut impl Rng) -> Result<Tensor> {
        let batch = x.batch();
        let mut shape = vec![batch];
        shape.extend_from_slice(out_shape);
        match self {
            Layer::Conv2d(conv) => {
                let padded = conv.pad(x.data(), batch);
                let g = ConvGeometry { batch, ..conv.geometry };
                let out = conv2d_forward_raw(&g, &padded, conv.weight.data(), conv.bias.data());
                conv.input = Some(padded);
                Tensor::new(shape, out)
            }
            Layer::Dense(d) => {
                let out = dense_forward_raw(batch, d.n, d.m, x.data(), d.weight.data(), d.bias.data());
                d.input = Some(x.into_data());
                Tensor::new(shape, out)
            }
            Layer::Lstm(l) => {
                let m = l.params.hidden_size();
                let zeros = vec![0.0; batch * m];
                let (hs, cache) = ops::lstm_forward_batched(&x, &l.params, &zeros, &zeros)?;
                let steps = cache_steps(&hs);
                l.cache = Some(cache);
                if l.return_sequences {
                    Ok(hs)
                } else {
                    let mut last = Vec::with_capacity(batch * m);
                    for b in 0..batch {
                        last.extend_from_slice(&hs.data()[((b + 1) * steps - 1) * m..(b + 1) * steps * m]);
                    }
                    Tensor::new(shape, last)
                }
            }
            Layer::Dropout(d) => {
                let (y, mask) = ops::dropout_forward(&x, d.rate, mode, rng)?;
                d.mask = mask;
                y.reshape(shape)
            }
            Layer::Activation(a) => {
                let y = ops::activation_forward(&x, a.kind);
                a.output = Some(y.data().to_vec());
                y.reshape(shape)
            }
            Layer::Softmax { output, .. } => {
                let y = ops::softmax(&x);
                *output = Some(y.data().to_vec());
                y.reshape(shape)
            }
            Layer::Flatten => x.reshape(shape),
        }
    }

    /// Backward over the cached forward pass; returns the input gradient
    /// (zeros when `need_input_grad` is false and the layer can skip it).
    fn backward(&mut self, grad: Tensor, in_shape: &[usize], need_input_grad: bool) -> Result<Tensor> {
        let batch = grad.batch();
        let mut shape = vec![batch];
        shape.extend_from_slice(in_shape);
        let missing = || Error::invalid("backward called without a cached forward pass");
        match self {
            Layer::Conv2d(conv) => {
                let padded = conv.input.as_ref().ok_or_else(missing)?;
                let g = ConvGeometry { batch, ..conv.geometry };
                let mut dx = need_input_grad.then(|| vec![0.0; padded.len()]);
                let (weight, dw) = conv.weight.data_and_grad_mut();
                conv2d_backward_raw(&g, padded, weight, grad.data(), dx.as_deref_mut(), dw, conv.bias.grad_mut());
                let dx = match dx {
                    Some(dx) => conv.crop(dx, batch),
                    None => vec![0.0; shape.iter().product()],
                };
                Tensor::new(shape, dx)
            }
            Layer::Dense(d) => {
                let x = d.input.as_ref().ok_or_else(missing)?;
                let mut dx = need_input_grad.then(|| vec![0.0; x.len()]);
                let (weight, wgrad) = d.weight.data_and_grad_mut();
                dense_backward_raw(batch, d.n, d.m, x, weight, grad.data(), dx.as_deref_mut(), wgrad, d.bias.grad_mut());
                Tensor::new(shape, dx.unwrap_or_else(|| vec![0.0; batch * d.n]))
            }
            Layer::Lstm(l) => {
                let cache = l.cache.as_ref().ok_or_else(missing)?;
                let m = l.params.hidden_size();
                let steps = in_shape[0];
                let grad_hs = if l.return_sequences {
                    grad.into_data()
                } else {
                    let mut full = vec![0.0; batch * steps * m];
                    for b in 0..batch {
                        full[((b + 1) * steps - 1) * m..(b + 1) * steps * m]
                            .copy_from_slice(&grad.data()[b * m..(b + 1) * m]);
                    }
                    full
                };
                let grads = ops::lstm_backward(cache, &mut l.params, &grad_hs)?;
                Tensor::new(shape, grads.dxs)
            }
            Layer::Dropout(d) => {
                let mut g = grad.into_data();
                if let Some(mask) = &d.mask {
                    g.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
                }
                Tensor::new(shape, g)
            }
            Layer::Activation(a) => {
                let y = a.output.as_ref().ok_or_else(missing)?;
                Tensor::new(shape, ops::activation_backward(y, grad.data(), a.kind))
            }
            Layer::Softmax { k, output } => {
                let y = output.as_ref().ok_or_else(missing)?;
                Tensor::new(shape, ops::softmax_backward(y, grad.data(), *k))
            }
            Layer::Flatten => grad.reshape(shape),
        }
    }

    /// Parameters with stable names.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Conv2d(c) => vec![("weight", &c.weight), ("bias", &c.bias)],
            Layer::Dense(d) => vec![("weight", &d.weight), ("bias", &d.bias)],
            Layer::Lstm(l) => vec![("w_x", &l.params.w_x), ("w_h", &l.params.w_h), ("bias", &l.params.bias)],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Lstm(l) => vec![&mut l.params.w_x, &mut l.params.w_h, &mut l.params.bias],
            _ => Vec::new(),
        }
    }

    fn clear_cache(&mut self) {
        match self {
            Layer::Conv2d(c) => c.input = None,
            Layer::Dense(d) => d.input = None,
            Layer::Lstm(l) => l.cache = None,
            Layer::Dropout(d) => d.mask = None,
            Layer::Activation(a) => a.output = None,
            Layer::Softmax { output, .. } => *output = None,
            Layer::Flatten => {}
        }
    }
}

fn cache_steps(hs: &Tensor) -> usize {
    hs.shape()[1]
}

/// Layers applied in order, with shapes validated when built.
#[derive(Debug, Clone)]
pub struct Sequential {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    /// `shapes[0]` is the input; `shapes[i + 1]` the output of layer `i`.
    shapes: Vec<Vec<usize>>,
}

impl Sequential {
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        let mut shapes = vec![input_shape.to_vec()];
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let current = shapes.last().expect("input shape present");
            let next = spec.output_shape(current)?;
            layers.push(Layer::build(spec, current, rng)?);
            shapes.push(next);
        }
        Ok(Self {
            specs: specs.to_vec(),
            layers,
            shapes,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("input shape present")
    }

    /// Per-sample output shape of layer `i`.
    pub fn layer_output_shape(&self, i: usize) -> &[usize] {
        &self.shapes[i + 1]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Run layers `0..end` on a batch.
    pub fn forward_to(&mut self, x: &Tensor, end: usize, mode: Mode, rng: &mut impl Rng) -> Result<Tensor> {
        if x.ndim() == 0 || x.shape()[1..] != self.shapes[0][..] {
            return Err(Error::shape(format!(
                "batch {:?} does not match model input {:?}",
                x.shape(),
                self.shapes[0]
            )));
        }
        let end = end.min(self.layers.len());
        let mut h = x.clone();
        for i in 0..end {
            h = self.layers[i].forward(h, &self.shapes[i + 1], mode, rng)?;
        }
        Ok(h)
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut impl Rng) -> Result<Tensor> {
        self.forward_to(x, self.layers.len(), mode, rng)
    }

    /// Backpropagate `grad` (gradient of the output of layer `end - 1`)
    /// through layers `end-1..=0`, accumulating parameter gradients.
    pub fn backward_from(&mut self, grad: Tensor, end: usize) -> Result<Tensor> {
        let end = end.min(self.layers.len());
        let mut g = grad;
        for i in (0..end).rev() {
            g = self.layers[i].backward(g, &self.shapes[i], i > 0)?;
        }
        Ok(g)
    }

    /// As [`Self::backward_from`] over all layers, also computing the input
    /// gradient of the first layer.
    pub fn backward_with_input_grad(&mut self, grad: Tensor) -> Result<Tensor> {
        let mut g = grad;
        for i in (0..self.layers.len()).rev() {
            g = self.layers[i].backward(g, &self.shapes[i], true)?;
        }
        Ok(g)
    }

    pub fn backward(&mut self, grad: Tensor) -> Result<Tensor> {
        self.backward_from(grad, self.layers.len())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn clear_caches(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// `(name, tensor)` for every parameter, named `"{index}.{param}"`.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.params().into_iter().map(move |(n, t)| (format!("{i}.{n}"), t)))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Overwrite parameter values from `(name, tensor)` pairs as produced by
    /// [`Self::named_params`]. Every parameter must be present with its shape.
    pub fn load_params<'a>(&mut self, mut lookup: impl FnMut(&str) -> Option<&'a Tensor>) -> Result<()> {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let names: Vec<&'static str> = layer.params().into_iter().map(|(n, _)| n).collect();
            for (name, param) in names.into_iter().zip(layer.params_mut()) {
                let key = format!("{i}.{name}");
                let src = lookup(&key).ok_or_else(|| Error::data(format!("missing parameter `{key}`")))?;
                if src.shape() != param.shape() {
                    return Err(Error::data(format!(
                        "parameter `{key}` has shape {:?}, expected {:?}",
                        src.shape(),
                        param.shape()
                    )));
                }
                param.data_mut().copy_from_slice(src.data());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shape_algebra_rejects_bad_stacks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Sequential::build(&[1, 4, 4], &[LayerSpec::conv3x3(2), LayerSpec::conv3x3(2), LayerSpec::conv3x3(2)], &mut rng).is_err());
        assert!(Sequential::build(&[1, 4, 4], &[LayerSpec::dense(3)], &mut rng).is_err());
        assert!(Sequential::build(&[5], &[LayerSpec::Dropout { rate: 1.0 }], &mut rng).is_err());
        let ok = Sequential::build(
            &[1, 6, 6],
            &[LayerSpec::conv3x3(2), LayerSpec::conv3x3(3), LayerSpec::Flatten, LayerSpec::dense(4)],
            &mut rng,
        )
        .unwrap();
        assert_eq!(ok.layer_output_shape(1), &[3, 2, 2]);
        assert_eq!(ok.output_shape(), &[4]);
    }

    #[test]
    fn padding_preserves_size() {
        let spec = LayerSpec::Conv2d {
            filters: 2,
            kernel: 3,
            padding: 1,
        };
        assert_eq!(spec.output_shape(&[1, 3, 3]).unwrap(), vec![2, 3, 3]);
    }

    #[test]
    fn forward_rejects_wrong_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Sequential::build(&[3], &[LayerSpec::dense(2)], &mut rng).unwrap();
        assert!(net.forward(&Tensor::zeros(&[4, 2]), Mode::Eval, &mut rng).is_err());
        assert_eq!(net.forward(&Tensor::zeros(&[4, 3]), Mode::Eval, &mut rng).unwrap().shape(), &[4, 2]);
    }

    #[test]
    fn lstm_init_sets_forget_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Sequential::build(&[5, 3], &[LayerSpec::Lstm { units: 4, return_sequences: false }], &mut rng).unwrap();
        let Layer::Lstm(l) = &net.layers()[0] else { unreachable!() };
        let b = l.params.bias.data();
        assert!(b[..4].iter().all(|&v| v == 0.0));
        assert!(b[4..8].iter().all(|&v| v == 1.0));
        assert!(b[8..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_without_forward_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Sequential::build(&[3], &[LayerSpec::dense(2)], &mut rng).unwrap();
        assert!(net.backward(Tensor::zeros(&[1, 2])).is_err());
    }
}
