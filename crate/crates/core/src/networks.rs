//! The three networks of the hierarchy: a convolutional and a recurrent
//! classifier over network-input matrices, whose penultimate activations are
//! concatenated and compressed by a deep autoencoder.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::covariance::InputMatrix;
use crate::error::{Error, Result};
use crate::rng::{substream, StageRng};
use crate::tensor::ops::{mse_grad, mse_loss, softmax_cross_entropy};
use crate::tensor::{ActivationKind, Adam, LayerSpec, Mode, Sequential, Tensor, TensorArchive};

pub const CNN_FEATURES: usize = 128;
pub const LSTM_FEATURES: usize = 1024;
pub const FUSED_DIM: usize = CNN_FEATURES + LSTM_FEATURES;
pub const LATENT_DIM: usize = 32;
pub const NUM_CLASSES: usize = 2;

/// Rows per forward pass when extracting features.
const EXTRACT_CHUNK: usize = 64;

/// Optimisation budget for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl TrainConfig {
    pub fn classifier_default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }

    pub fn autoencoder_default() -> Self {
        Self {
            epochs: 200,
            ..Self::classifier_default()
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config(format!("{path}.batch_size"), "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config(
                format!("{path}.learning_rate"),
                format!("must lie in (0, 1], got {}", self.learning_rate),
            ));
        }
        Ok(())
    }
}

/// How the recurrent network reads a matrix as a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceOrientation {
    /// Each row is one timestep.
    #[default]
    Rows,
    Columns,
}

/// One row of the per-epoch training trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

pub fn cnn_specs() -> Vec<LayerSpec> {
    use ActivationKind::Relu;
    vec![
        LayerSpec::conv3x3(32),
        LayerSpec::act(Relu),
        LayerSpec::conv3x3(64),
        LayerSpec::act(Relu),
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::Flatten,
        LayerSpec::dense(64),
        LayerSpec::act(Relu),
        LayerSpec::dense(CNN_FEATURES),
        LayerSpec::act(Relu),
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::dense(NUM_CLASSES),
        LayerSpec::Softmax,
    ]
}

/// Layers up to and including the penultimate activation.
const CNN_PENULTIMATE_END: usize = 10;

pub fn lstm_specs() -> Vec<LayerSpec> {
    use ActivationKind::Relu;
    vec![
        LayerSpec::Lstm {
            units: 128,
            return_sequences: true,
        },
        LayerSpec::Lstm {
            units: 256,
            return_sequences: false,
        },
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::dense(512),
        LayerSpec::act(Relu),
        LayerSpec::dense(LSTM_FEATURES),
        LayerSpec::act(Relu),
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::dense(NUM_CLASSES),
        LayerSpec::Softmax,
    ]
}

const LSTM_PENULTIMATE_END: usize = 7;

pub fn dae_specs(input_dim: usize) -> Vec<LayerSpec> {
    use ActivationKind::{Relu, Sigmoid, Tanh};
    vec![
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::dense(512),
        LayerSpec::act(Relu),
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::dense(128),
        LayerSpec::act(Relu),
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::dense(LATENT_DIM),
        LayerSpec::act(Sigmoid),
        LayerSpec::dense(128),
        LayerSpec::act(Sigmoid),
        LayerSpec::dense(512),
        LayerSpec::act(Relu),
        LayerSpec::dense(input_dim),
        LayerSpec::act(Tanh),
    ]
}

const DAE_LATENT_END: usize = 9;

fn expect_dim(net: &Sequential, end: usize, dim: usize, what: &str) -> Result<()> {
    let got = net.layer_output_shape(end - 1);
    if got != [dim] {
        return Err(Error::shape(format!("{what} must be [{dim}], architecture gives {got:?}")));
    }
    Ok(())
}

fn check_classifier(net: &Sequential, penultimate_end: usize, features: usize, what: &str) -> Result<()> {
    expect_dim(net, penultimate_end, features, &format!("{what} penultimate layer"))?;
    expect_dim(net, net.len(), NUM_CLASSES, &format!("{what} output"))?;
    if !matches!(net.specs().last(), Some(LayerSpec::Softmax)) {
        return Err(Error::shape(format!("{what} must end in softmax")));
    }
    Ok(())
}

fn check_inputs(inputs: &[InputMatrix], size: usize) -> Result<()> {
    match inputs.iter().position(|m| m.size != size || m.values.len() != size * size) {
        Some(i) => Err(Error::shape(format!("input {i} is not a {size}x{size} matrix"))),
        None => Ok(()),
    }
}

fn check_labels(labels: &[usize], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} inputs", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(Error::invalid(format!("label {bad} is not binary")));
    }
    for class in 0..NUM_CLASSES {
        if labels.iter().filter(|&&l| l == class).count() < 2 {
            return Err(Error::Training(format!("need at least 2 examples of class {class}")));
        }
    }
    Ok(())
}

/// Softmax classifier whose penultimate activations are exposed as features.
#[derive(Debug, Clone)]
struct Classifier {
    net: Sequential,
    penultimate_end: usize,
}

impl Classifier {
    fn logits_end(&self) -> usize {
        self.net.len() - 1
    }

    /// Mini-batch Adam on softmax cross-entropy, backpropagating the combined
    /// gradient from the logits.
    fn train(
        &mut self,
        samples: &[Vec<f64>],
        labels: &[usize],
        cfg: &TrainConfig,
        shuffle_rng: &mut StageRng,
        dropout_rng: &mut StageRng,
    ) -> Result<Vec<EpochStats>> {
        cfg.validate("train")?;
        let shape = self.net.input_shape().to_vec();
        let mut adam = Adam::new(cfg.learning_rate)?;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut trace = Vec::with_capacity(cfg.epochs);
        let end = self.logits_end();
        for epoch in 0..cfg.epochs {
            order.shuffle(shuffle_rng);
            let (mut total_loss, mut correct) = (0.0, 0usize);
            for batch in order.chunks(cfg.batch_size) {
                let rows: Vec<&[f64]> = batch.iter().map(|&i| samples[i].as_slice()).collect();
                let targets: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                let x = Tensor::stack(&rows, &shape)?;
                self.net.zero_grad();
                let logits = self.net.forward_to(&x, end, Mode::Train, dropout_rng)?;
                let (loss, grad) = softmax_cross_entropy(&logits, &targets)?;
                if !loss.is_finite() {
                    return Err(Error::Training(format!("non-finite loss in epoch {epoch}")));
                }
                self.net.backward_from(grad, end)?;
                adam.step(&mut self.net.params_mut())?;
                total_loss += loss * batch.len() as f64;
                correct += argmax_rows(logits.data())
                    .zip(&targets)
                    .filter(|(p, t)| p == *t)
                    .count();
            }
            trace.push(EpochStats {
                epoch: epoch + 1,
                loss: total_loss / samples.len() as f64,
                accuracy: correct as f64 / samples.len() as f64,
            });
        }
        self.net.clear_caches();
        Ok(trace)
    }

    fn run_eval(&mut self, samples: &[Vec<f64>], end: usize) -> Result<Vec<Vec<f64>>> {
        let shape = self.net.input_shape().to_vec();
        let mut rng = substream(0, "eval");
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(EXTRACT_CHUNK) {
            let rows: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
            let y = self.net.forward_to(&Tensor::stack(&rows, &shape)?, end, Mode::Eval, &mut rng)?;
            out.extend((0..chunk.len()).map(|b| y.sample(b).to_vec()));
        }
        self.net.clear_caches();
        Ok(out)
    }

    fn probabilities(&mut self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let end = self.net.len();
        self.run_eval(samples, end)
    }

    fn penultimate(&mut self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.run_eval(samples, self.penultimate_end)
    }

    fn archive_into(&self, archive: &mut TensorArchive, prefix: &str) -> Result<()> {
        for (name, t) in self.net.named_params() {
            archive.insert(format!("{prefix}/{name}"), t.clone())?;
        }
        Ok(())
    }

    fn load(&mut self, archive: &TensorArchive, prefix: &str) -> Result<()> {
        self.net.load_params(|name| archive.get(&format!("{prefix}/{name}")))
    }
}

fn argmax_rows(values: &[f64]) -> impl Iterator<Item = usize> + '_ {
    values.chunks_exact(NUM_CLASSES).map(|row| {
        row.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    })
}

/// Two convolutional and two dense hidden layers over a `size`×`size` matrix.
#[derive(Debug, Clone)]
pub struct CnnModel {
    inner: Classifier,
    input_size: usize,
}

impl CnnModel {
    pub fn build(input_size: usize, seed: u64) -> Result<Self> {
        Self::from_specs(input_size, &cnn_specs(), seed)
    }

    /// Build from explicit layers; fails unless the penultimate layer is
    /// 128 wide and the output is a two-way softmax.
    pub fn from_specs(input_size: usize, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let net = Sequential::build(&[1, input_size, input_size], specs, &mut substream(seed, "init/cnn"))?;
        check_classifier(&net, CNN_PENULTIMATE_END, CNN_FEATURES, "CNN")?;
        Ok(Self {
            inner: Classifier {
                net,
                penultimate_end: CNN_PENULTIMATE_END,
            },
            input_size,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn network(&self) -> &Sequential {
        &self.inner.net
    }

    fn samples(&self, inputs: &[InputMatrix]) -> Result<Vec<Vec<f64>>> {
        check_inputs(inputs, self.input_size)?;
        Ok(inputs.iter().map(|m| m.values.clone()).collect())
    }

    pub fn penultimate(&mut self, inputs: &[InputMatrix]) -> Result<Vec<Vec<f64>>> {
        let samples = self.samples(inputs)?;
        self.inner.penultimate(&samples)
    }

    pub fn predict_proba(&mut self, inputs: &[InputMatrix]) -> Result<Vec<Vec<f64>>> {
        let samples = self.samples(inputs)?;
        self.inner.probabilities(&samples)
    }

    pub fn archive_into(&self, archive: &mut TensorArchive) -> Result<()> {
        self.inner.archive_into(archive, "cnn")
    }

    pub fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        self.inner.load(archive, "cnn")
    }
}

/// Two stacked LSTMs and two dense hidden layers, reading the matrix as a
/// sequence of rows (or columns).
#[derive(Debug, Clone)]
pub struct LstmModel {
    inner: Classifier,
    input_size: usize,
    orientation: SequenceOrientation,
}

impl LstmModel {
    pub fn build(input_size: usize, orientation: SequenceOrientation, seed: u64) -> Result<Self> {
        Self::from_specs(input_size, orientation, &lstm_specs(), seed)
    }

    pub fn from_specs(
        input_size: usize,
        orientation: SequenceOrientation,
        specs: &[LayerSpec],
        seed: u64,
    ) -> Result<Self> {
        let net = Sequential::build(&[input_size, input_size], specs, &mut substream(seed, "init/lstm"))?;
        check_classifier(&net, LSTM_PENULTIMATE_END, LSTM_FEATURES, "LSTM")?;
        Ok(Self {
            inner: Classifier {
                net,
                penultimate_end: LSTM_PENULTIMATE_END,
            },
            input_size,
            orientation,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn orientation(&self) -> SequenceOrientation {
        self.orientation
    }

    pub fn network(&self) -> &Sequential {
        &self.inner.net
    }

    fn samples(&self, inputs: &[InputMatrix]) -> Result<Vec<Vec<f64>>> {
        check_inputs(inputs, self.input_size)?;
        let s = self.input_size;
        Ok(inputs
            .iter()
            .map(|m| match self.orientation {
                SequenceOrientation::Rows => m.values.clone(),
                SequenceOrientation::Columns => (0..s * s).map(|k| m.values[(k % s) * s + k / s]).collect(),
            })
            .collect())
    }

    pub fn penultimate(&mut self, inputs: &[InputMatrix]) -> Result<Vec<Vec<f64>>> {
        let samples = self.samples(inputs)?;
        self.inner.penultimate(&samples)
    }

    pub fn predict_proba(&mut self, inputs: &[InputMatrix]) -> Result<Vec<Vec<f64>>> {
        let samples = self.samples(inputs)?;
        self.inner.probabilities(&samples)
    }

    pub fn archive_into(&self, archive: &mut TensorArchive) -> Result<()> {
        self.inner.archive_into(archive, "lstm")
    }

    pub fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        self.inner.load(archive, "lstm")
    }
}

/// Train the CNN from its seeded initialisation. Returns the model and the
/// per-epoch trace.
pub fn train_cnn(
    inputs: &[InputMatrix],
    labels: &[usize],
    cfg: &TrainConfig,
    input_size: usize,
    seed: u64,
) -> Result<(CnnModel, Vec<EpochStats>)> {
    check_labels(labels, inputs.len())?;
    let mut model = CnnModel::build(input_size, seed)?;
    let samples = model.samples(inputs)?;
    let trace = model.inner.train(
        &samples,
        labels,
        cfg,
        &mut substream(seed, "shuffle/cnn"),
        &mut substream(seed, "dropout/cnn"),
    )?;
    Ok((model, trace))
}

pub fn train_lstm(
    inputs: &[InputMatrix],
    labels: &[usize],
    cfg: &TrainConfig,
    input_size: usize,
    orientation: SequenceOrientation,
    seed: u64,
) -> Result<(LstmModel, Vec<EpochStats>)> {
    check_labels(labels, inputs.len())?;
    let mut model = LstmModel::build(input_size, orientation, seed)?;
    let samples = model.samples(inputs)?;
    let trace = model.inner.train(
        &samples,
        labels,
        cfg,
        &mut substream(seed, "shuffle/lstm"),
        &mut substream(seed, "dropout/lstm"),
    )?;
    Ok((model, trace))
}

/// CNN penultimate activations followed by LSTM penultimate activations,
/// computed in evaluation mode.
pub fn extract_fused(cnn: &mut CnnModel, lstm: &mut LstmModel, inputs: &[InputMatrix]) -> Result<Vec<Vec<f64>>> {
    if cnn.input_size != lstm.input_size {
        return Err(Error::shape(format!(
            "CNN expects {0}x{0} inputs, LSTM {1}x{1}",
            cnn.input_size, lstm.input_size
        )));
    }
    let a = cnn.penultimate(inputs)?;
    let b = lstm.penultimate(inputs)?;
    let fused: Vec<Vec<f64>> = a
        .into_iter()
        .zip(b)
        .map(|(mut f, l)| {
            f.extend(l);
            f
        })
        .collect();
    if fused.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite fused feature".into()));
    }
    Ok(fused)
}

/// Per-dimension standardisation fitted on a training set. Constant
/// dimensions keep unit scale, so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::invalid("cannot standardise an empty set"));
        };
        let d = first.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::shape("rows differ in length"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd > 1e-12 * m.abs() { sd } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Deep autoencoder over standardised fused features.
#[derive(Debug, Clone)]
pub struct DaeModel {
    net: Sequential,
    standardizer: Standardizer,
}

impl DaeModel {
    pub fn build(input_dim: usize, seed: u64) -> Result<Self> {
        Self::from_specs(input_dim, &dae_specs(input_dim), seed)
    }

    pub fn from_specs(input_dim: usize, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let net = Sequential::build(&[input_dim], specs, &mut substream(seed, "init/dae"))?;
        expect_dim(&net, DAE_LATENT_END, LATENT_DIM, "DAE latent layer")?;
        expect_dim(&net, net.len(), input_dim, "DAE reconstruction")?;
        Ok(Self {
            net,
            standardizer: Standardizer {
                mean: vec![0.0; input_dim],
                scale: vec![1.0; input_dim],
            },
        })
    }

    pub fn input_dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn network(&self) -> &Sequential {
        &self.net
    }

    fn standardized(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match features.iter().position(|f| f.len() != self.input_dim()) {
            Some(i) => Err(Error::shape(format!(
                "feature {i} has {} dims, autoencoder expects {}",
                features[i].len(),
                self.input_dim()
            ))),
            None => Ok(features.iter().map(|f| self.standardizer.apply(f)).collect()),
        }
    }

    fn eval_to(&mut self, features: &[Vec<f64>], end: usize) -> Result<Vec<Vec<f64>>> {
        let rows = self.standardized(features)?;
        let d = self.input_dim();
        let mut rng = substream(0, "eval");
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(EXTRACT_CHUNK) {
            let refs: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
            let y = self.net.forward_to(&Tensor::stack(&refs, &[d])?, end, Mode::Eval, &mut rng)?;
            out.extend((0..chunk.len()).map(|b| y.sample(b).to_vec()));
        }
        self.net.clear_caches();
        Ok(out)
    }

    /// Latent codes of `features`.
    pub fn encode(&mut self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.eval_to(features, DAE_LATENT_END)
    }

    /// Reconstructions in standardised coordinates.
    pub fn reconstruct(&mut self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let end = self.net.len();
        self.eval_to(features, end)
    }

    /// Mean squared reconstruction error in standardised coordinates.
    pub fn reconstruction_mse(&mut self, features: &[Vec<f64>]) -> Result<f64> {
        let targets = self.standardized(features)?;
        let recon = self.reconstruct(features)?;
        let total: f64 = recon
            .iter()
            .zip(&targets)
            .map(|(r, t)| mse_loss(r, t))
            .sum::<Result<f64>>()?;
        Ok(total / features.len() as f64)
    }

    pub fn archive_into(&self, archive: &mut TensorArchive) -> Result<()> {
        for (name, t) in self.net.named_params() {
            archive.insert(format!("dae/{name}"), t.clone())?;
        }
        archive.insert("dae/mean", Tensor::vector(self.standardizer.mean.clone()))?;
        archive.insert("dae/scale", Tensor::vector(self.standardizer.scale.clone()))
    }

    pub fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        self.net.load_params(|name| archive.get(&format!("dae/{name}")))?;
        let stat = |name: &str| -> Result<Vec<f64>> {
            let t = archive
                .get(name)
                .ok_or_else(|| Error::data(format!("checkpoint lacks `{name}`")))?;
            if t.len() != self.standardizer.dim() {
                return Err(Error::data(format!("`{name}` has the wrong length")));
            }
            Ok(t.data().to_vec())
        };
        self.standardizer = Standardizer {
            mean: stat("dae/mean")?,
            scale: stat("dae/scale")?,
        };
        Ok(())
    }
}

/// Fit the standardiser on `features`, then train the autoencoder to
/// reconstruct them under MSE.
pub fn train_dae(features: &[Vec<f64>], cfg: &TrainConfig, seed: u64) -> Result<(DaeModel, Vec<EpochStats>)> {
    if features.len() < 2 {
        return Err(Error::Training("autoencoder needs at least 2 features".into()));
    }
    cfg.validate("dae")?;
    let mut model = DaeModel::build(features[0].len(), seed)?;
    model.standardizer = Standardizer::fit(features)?;
    let rows = model.standardized(features)?;
    let d = model.input_dim();
    let mut adam = Adam::new(cfg.learning_rate)?;
    let mut shuffle_rng = substream(seed, "shuffle/dae");
    let mut dropout_rng = substream(seed, "dropout/dae");
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let refs: Vec<&[f64]> = batch.iter().map(|&i| rows[i].as_slice()).collect();
            let x = Tensor::stack(&refs, &[d])?;
            model.net.zero_grad();
            let y = model.net.forward(&x, Mode::Train, &mut dropout_rng)?;
            let loss = mse_loss(y.data(), x.data())?;
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite reconstruction loss in epoch {epoch}")));
            }
            model.net.backward(Tensor::new(y.shape().to_vec(), mse_grad(y.data(), x.data()))?)?;
            adam.step(&mut model.net.params_mut())?;
            total += loss * batch.len() as f64;
        }
        trace.push(EpochStats {
            epoch: epoch + 1,
            loss: total / rows.len() as f64,
            accuracy: f64::NAN,
        });
    }
    model.net.clear_caches();
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architectures_have_the_published_widths() {
        let cnn = CnnModel::build(8, 0).unwrap();
        assert_eq!(cnn.network().layer_output_shape(CNN_PENULTIMATE_END - 1), [128]);
        let lstm = LstmModel::build(8, SequenceOrientation::Rows, 0).unwrap();
        assert_eq!(lstm.network().layer_output_shape(LSTM_PENULTIMATE_END - 1), [1024]);
        let dae = DaeModel::build(FUSED_DIM, 0).unwrap();
        assert_eq!(dae.network().layer_output_shape(DAE_LATENT_END - 1), [32]);
        assert_eq!(dae.network().output_shape(), [FUSED_DIM]);
    }

    #[test]
    fn altered_widths_fail_to_build() {
        let mut specs = cnn_specs();
        specs[8] = LayerSpec::dense(127);
        assert!(CnnModel::from_specs(8, &specs, 0).is_err());
        let mut specs = lstm_specs();
        specs[5] = LayerSpec::dense(1000);
        assert!(LstmModel::from_specs(8, SequenceOrientation::Rows, &specs, 0).is_err());
        let mut specs = dae_specs(FUSED_DIM);
        specs[7] = LayerSpec::dense(16);
        assert!(DaeModel::from_specs(FUSED_DIM, &specs, 0).is_err());
        let mut specs = cnn_specs();
        specs.pop();
        assert!(CnnModel::from_specs(8, &specs, 0).is_err());
    }

    #[test]
    fn too_small_inputs_fail_for_the_cnn() {
        assert!(CnnModel::build(4, 0).is_err());
        assert!(CnnModel::build(5, 0).is_ok());
    }

    #[test]
    fn single_class_labels_are_rejected() {
        let inputs = vec![
            InputMatrix {
                size: 5,
                values: vec![0.0; 25]
            };
            4
        ];
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::classifier_default()
        };
        assert!(matches!(train_cnn(&inputs, &[1, 1, 1, 1], &cfg, 5, 0), Err(Error::Training(_))));
        assert!(matches!(train_cnn(&inputs, &[0, 1, 1, 1], &cfg, 5, 0), Err(Error::Training(_))));
        assert!(matches!(train_cnn(&inputs, &[0, 2, 1, 1], &cfg, 5, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn standardizer_handles_constant_dimensions() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.apply(&rows[0]), vec![-1.0, 0.0]);
        assert_eq!(s.apply(&rows[1]), vec![1.0, 0.0]);
    }

    #[test]
    fn column_orientation_transposes() {
        let m = InputMatrix {
            size: 5,
            values: (0..25).map(f64::from).collect(),
        };
        let lstm = LstmModel::build(5, SequenceOrientation::Columns, 0).unwrap();
        let s = lstm.samples(std::slice::from_ref(&m)).unwrap();
        assert_eq!(&s[0][..5], &[0.0, 5.0, 10.0, 15.0, 20.0]);
    }
}
