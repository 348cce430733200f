//! Central finite-difference gradient checking.
//!
//! The numeric side only ever calls forward passes and loss values, so it
//! stays independent of every backward kernel it is used to verify.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{ActivationKind, LayerSpec, Mode, Sequential};
use super::ops::{bce_loss, mse_grad, mse_loss, softmax_cross_entropy};
use super::Tensor;
use crate::error::{Error, Result};

/// Default perturbation.
pub const STEP: f64 = 1e-5;

/// Denominator floor for [`relative_error`]; below it errors are absolute.
pub const REL_FLOOR: f64 = 1e-6;

/// Central differences of `loss` with respect to each coordinate exposed by
/// `coords`. `coords` must return the same slice (same length and meaning)
/// on every call.
pub fn numeric_gradient<S>(
    state: &mut S,
    coords: impl Fn(&mut S) -> &mut [f64],
    mut loss: impl FnMut(&mut S) -> f64,
    step: f64,
) -> Vec<f64> {
    let n = coords(state).len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let orig = coords(state)[i];
        coords(state)[i] = orig + step;
        let plus = loss(state);
        coords(state)[i] = orig - step;
        let minus = loss(state);
        coords(state)[i] = orig;
        out.push((plus - minus) / (2.0 * step));
    }
    out
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Largest [`relative_error`] over paired slices.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Scalar objective applied to a model's batched output.
#[derive(Debug, Clone)]
pub enum Objective {
    /// Mean cross-entropy of probability rows (model ends in softmax).
    ProbCrossEntropy(Vec<usize>),
    /// Mean softmax cross-entropy of logit rows.
    LogitCrossEntropy(Vec<usize>),
    /// Mean squared error against a target of the output's size.
    Mse(Vec<f64>),
}

impl Objective {
    pub fn value(&self, out: &Tensor) -> Result<f64> {
        match self {
            Objective::ProbCrossEntropy(t) => {
                let k = out.len() / t.len();
                let mut total = 0.0;
                for (row, &target) in out.data().chunks_exact(k).zip(t) {
                    total += bce_loss(row, target)?;
                }
                Ok(total / t.len() as f64)
            }
            Objective::LogitCrossEntropy(t) => Ok(softmax_cross_entropy(out, t)?.0),
            Objective::Mse(y) => mse_loss(out.data(), y),
        }
    }

    pub fn gradient(&self, out: &Tensor) -> Result<Tensor> {
        match self {
            Objective::ProbCrossEntropy(t) => {
                let k = out.len() / t.len();
                let mut g = vec![0.0; out.len()];
                for (b, &target) in t.iter().enumerate() {
                    g[b * k + target] = -1.0 / (out.data()[b * k + target] * t.len() as f64);
                }
                Tensor::new(out.shape().to_vec(), g)
            }
            Objective::LogitCrossEntropy(t) => Ok(softmax_cross_entropy(out, t)?.1),
            Objective::Mse(y) => Tensor::new(out.shape().to_vec(), mse_grad(out.data(), y)),
        }
    }
}

/// Worst relative errors found by [`check_sequential`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCheck {
    pub param_error: f64,
    pub input_error: f64,
    pub coordinates: usize,
}

impl ModelCheck {
    pub fn max_error(&self) -> f64 {
        self.param_error.max(self.input_error)
    }
}

/// Compare backpropagated parameter and input gradients of `model` against
/// central differences of `objective`. Training mode is used throughout;
/// dropout masks are held fixed by reseeding from `dropout_seed` before every
/// forward pass.
pub fn check_sequential(model: &mut Sequential, x: &Tensor, objective: &Objective, dropout_seed: u64) -> Result<ModelCheck> {
    let loss = |model: &mut Sequential, x: &Tensor| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let out = model.forward(x, Mode::Train, &mut rng)?;
        objective.value(&out)
    };

    model.zero_grad();
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let out = model.forward(x, Mode::Train, &mut rng)?;
    let dx = model.backward_with_input_grad(objective.gradient(&out)?)?;
    let analytic: Vec<Vec<f64>> = model
        .params_mut()
        .into_iter()
        .map(|p| p.grad().map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec))
        .collect();

    let mut failure: Option<Error> = None;
    let mut param_error = 0.0f64;
    let mut coordinates = dx.len();
    for (k, expected) in analytic.iter().enumerate() {
        let mut state = (&mut *model, &mut failure);
        let numeric = numeric_gradient(
            &mut state,
            |s| s.0.params_mut().swap_remove(k).data_mut(),
            |s| loss(s.0, x).unwrap_or_else(|e| {
                s.1.get_or_insert(e);
                f64::NAN
            }),
            STEP,
        );
        param_error = param_error.max(max_relative_error(expected, &numeric));
        coordinates += expected.len();
    }
    let mut input = x.clone();
    let numeric_dx = numeric_gradient(
        &mut input,
        |x| x.data_mut(),
        |x| loss(model, x).unwrap_or(f64::NAN),
        STEP,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ModelCheck {
        param_error,
        input_error: max_relative_error(dx.data(), &numeric_dx),
        coordinates,
    })
}

/// A layer kind exercised by [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Conv2d,
    Conv2dPadded,
    Dense,
    LstmSequence,
    LstmLastStep,
    Relu,
    Sigmoid,
    Tanh,
    SoftmaxBce,
    SoftmaxCrossEntropy,
    Mse,
    Dropout,
    ConvStack,
    RecurrentStack,
    AutoencoderStack,
}

impl Case {
    pub const ALL: [Case; 15] = [
        Case::Conv2d,
        Case::Conv2dPadded,
        Case::Dense,
        Case::LstmSequence,
        Case::LstmLastStep,
        Case::Relu,
        Case::Sigmoid,
        Case::Tanh,
        Case::SoftmaxBce,
        Case::SoftmaxCrossEntropy,
        Case::Mse,
        Case::Dropout,
        Case::ConvStack,
        Case::RecurrentStack,
        Case::AutoencoderStack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Case::Conv2d => "conv2d",
            Case::Conv2dPadded => "conv2d_padded",
            Case::Dense => "dense",
            Case::LstmSequence => "lstm_sequence",
            Case::LstmLastStep => "lstm_last_step",
            Case::Relu => "relu",
            Case::Sigmoid => "sigmoid",
            Case::Tanh => "tanh",
            Case::SoftmaxBce => "softmax_bce",
            Case::SoftmaxCrossEntropy => "softmax_cross_entropy",
            Case::Mse => "mse",
            Case::Dropout => "dropout",
            Case::ConvStack => "conv_stack",
            Case::RecurrentStack => "recurrent_stack",
            Case::AutoencoderStack => "autoencoder_stack",
        }
    }

    fn layout(self) -> (Vec<usize>, Vec<LayerSpec>, Head) {
        use ActivationKind::{Relu, Sigmoid, Tanh};
        let conv = |filters, padding| LayerSpec::Conv2d {
            filters,
            kernel: 3,
            padding,
        };
        let lstm = |units, return_sequences| LayerSpec::Lstm {
            units,
            return_sequences,
        };
        let d = LayerSpec::dense;
        let a = LayerSpec::act;
        match self {
            Case::Conv2d => (vec![2, 5, 4], vec![conv(3, 0), LayerSpec::Flatten], Head::Mse),
            Case::Conv2dPadded => (vec![2, 4, 4], vec![conv(2, 1), LayerSpec::Flatten], Head::Mse),
            Case::Dense => (vec![5], vec![d(3)], Head::Mse),
            Case::LstmSequence => (vec![3, 4], vec![lstm(5, true), LayerSpec::Flatten], Head::Mse),
            Case::LstmLastStep => (vec![3, 4], vec![lstm(5, false)], Head::Mse),
            Case::Relu => (vec![4], vec![d(6), a(Relu)], Head::Mse),
            Case::Sigmoid => (vec![4], vec![d(6), a(Sigmoid)], Head::Mse),
            Case::Tanh => (vec![4], vec![d(6), a(Tanh)], Head::Mse),
            Case::SoftmaxBce => (vec![4], vec![d(2), LayerSpec::Softmax], Head::Probs),
            Case::SoftmaxCrossEntropy => (vec![4], vec![d(3)], Head::Logits),
            Case::Mse => (vec![3], vec![d(3)], Head::Mse),
            Case::Dropout => (vec![4], vec![d(6), LayerSpec::Dropout { rate: 0.5 }, d(2)], Head::Mse),
            Case::ConvStack => (
                vec![1, 6, 6],
                vec![
                    conv(2, 0),
                    a(Relu),
                    conv(3, 0),
                    a(Relu),
                    LayerSpec::Dropout { rate: 0.25 },
                    LayerSpec::Flatten,
                    d(4),
                    a(Relu),
                    d(2),
                    LayerSpec::Softmax,
                ],
                Head::Probs,
            ),
            Case::RecurrentStack => (
                vec![4, 3],
                vec![lstm(4, true), lstm(3, false), LayerSpec::Dropout { rate: 0.25 }, d(4), a(Relu), d(2), LayerSpec::Softmax],
                Head::Probs,
            ),
            Case::AutoencoderStack => (
                vec![10],
                vec![
                    LayerSpec::Dropout { rate: 0.25 },
                    d(8),
                    a(Relu),
                    d(6),
                    a(Relu),
                    d(3),
                    a(Sigmoid),
                    d(6),
                    a(Sigmoid),
                    d(8),
                    a(Relu),
                    d(10),
                    a(Tanh),
                ],
                Head::Mse,
            ),
        }
    }

    /// Random model, batch and objective for this case, drawn from `seed`.
    pub fn instance(self, seed: u64) -> Result<(Sequential, Tensor, Objective)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (input, specs, head) = self.layout();
        let mut model = Sequential::build(&input, &specs, &mut rng)?;
        for p in model.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
        }
        let batch = 3;
        let mut shape = vec![batch];
        shape.extend_from_slice(&input);
        let n: usize = shape.iter().product();
        let x = Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let out_len = batch * model.output_shape().iter().product::<usize>();
        let classes = model.output_shape()[0];
        let objective = match head {
            Head::Mse => Objective::Mse((0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect()),
            Head::Probs => Objective::ProbCrossEntropy((0..batch).map(|_| rng.random_range(0..classes)).collect()),
            Head::Logits => Objective::LogitCrossEntropy((0..batch).map(|_| rng.random_range(0..classes)).collect()),
        };
        Ok((model, x, objective))
    }
}

#[derive(Debug, Clone, Copy)]
enum Head {
    Mse,
    Probs,
    Logits,
}

/// Worst error of one case over its seeded instances.
#[derive(Debug, Clone, Copy)]
pub struct CaseReport {
    pub case: Case,
    pub instances: usize,
    pub max_error: f64,
}

/// Check every [`Case`] on `instances` seeded instances each.
pub fn run_suite(instances: usize) -> Result<Vec<CaseReport>> {
    Case::ALL
        .iter()
        .enumerate()
        .map(|(c, &case)| {
            let mut max_error = 0.0f64;
            for i in 0..instances {
                let seed = (c as u64) << 32 | i as u64;
                let (mut model, x, objective) = case.instance(seed)?;
                max_error = max_error.max(check_sequential(&mut model, &x, &objective, seed ^ 0x5eed)?.max_error());
            }
            Ok(CaseReport {
                case,
                instances,
                max_error,
            })
        })
        .collect()
}
