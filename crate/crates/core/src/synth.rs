//! Class-conditional synthetic trials for desk-scale runs.
//!
//! Every trial mixes a few background sources through a subject-specific
//! perturbation of one shared mixing matrix, plus independent sensor noise. Positive trials
//! add one more common source projected onto a fixed ±1 channel pattern,
//! so their expected cross-covariance differs from negatives by
//! `separability² · p pᵀ`. At separability 0 the classes are identical.
//! Labels are carried by prompt tags drawn from the target task's positive
//! or negative prompt set.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::container::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::labels::{derive_label, LabelTable, TaskId};
use crate::pipeline::Trial;
use crate::rng::substream;
use crate::signal::{Prompt, Recording};

const BACKGROUND_SOURCES: usize = 3;
const SENSOR_NOISE: f64 = 0.5;
/// Spread of each subject's mixing matrix around the shared one.
const SUBJECT_SPREAD: f64 = 0.3;
/// Amplitudes are scaled to a microvolt-like range.
const AMPLITUDE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_trials: usize,
    pub n_channels: usize,
    pub n_subjects: usize,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    /// Amplitude of the class-specific source relative to the background.
    pub separability: f64,
    /// Task whose labels the class structure follows.
    pub target_task: TaskId,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_trials: 200,
            n_channels: 8,
            n_subjects: 3,
            n_samples: 256,
            sample_rate_hz: 256.0,
            separability: 1.0,
            target_task: TaskId::Bilabial,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if self.n_channels < 2 {
            return Err(Error::invalid("n_channels must be at least 2"));
        }
        if self.n_subjects == 0 || self.n_subjects > self.n_trials {
            return Err(Error::invalid("n_subjects must be in 1..=n_trials"));
        }
        if self.n_samples < 2 {
            return Err(Error::invalid("n_samples must be at least 2"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample_rate_hz must be positive"));
        }
        if !(self.separability.is_finite() && self.separability >= 0.0) {
            return Err(Error::invalid("separability must be a finite value >= 0"));
        }
        Ok(())
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Generate the dataset. Amplitudes are rounded to `f32` so the container
/// round trip is exact.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let task = LabelTable::default().task(spec.target_task)?;
    let (positive, negative): (Vec<Prompt>, Vec<Prompt>) =
        Prompt::ALL.into_iter().partition(|&p| derive_label(p, &task) == 1);
    let (c, t) = (spec.n_channels, spec.n_samples);

    let mut rng = substream(spec.seed, "synth/pattern");
    let pattern: Vec<f64> = (0..c).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let shared: Vec<f64> = (0..c * BACKGROUND_SOURCES).map(|_| normal(&mut rng)).collect();
    let mixing: Vec<Vec<f64>> = (0..spec.n_subjects)
        .map(|_| shared.iter().map(|a| a + SUBJECT_SPREAD * normal(&mut rng)).collect())
        .collect();

    let mut labels: Vec<usize> = (0..spec.n_trials).map(|i| usize::from(i < spec.n_trials / 2)).collect();
    labels.shuffle(&mut substream(spec.seed, "synth/labels"));

    let names: Vec<String> = (0..c).map(|i| format!("E{:02}", i + 1)).collect();
    let mut rng = substream(spec.seed, "synth/signals");
    let trials = (0..spec.n_trials)
        .map(|i| {
            let subject = i % spec.n_subjects;
            let label = labels[i];
            let prompt = *if label == 1 { &positive } else { &negative }
                .choose(&mut rng)
                .expect("prompt sets are non-empty");
            let sources: Vec<Vec<f64>> = (0..BACKGROUND_SOURCES).map(|_| (0..t).map(|_| normal(&mut rng)).collect()).collect();
            let class_source: Vec<f64> = (0..t).map(|_| normal(&mut rng)).collect();
            let a = &mixing[subject];
            let channels = (0..c)
                .map(|ch| {
                    (0..t)
                        .map(|k| {
                            let mut v: f64 = (0..BACKGROUND_SOURCES).map(|s| a[ch * BACKGROUND_SOURCES + s] * sources[s][k]).sum();
                            v += SENSOR_NOISE * normal(&mut rng);
                            if label == 1 {
                                v += spec.separability * pattern[ch] * class_source[k];
                            }
                            (AMPLITUDE * v) as f32 as f64
                        })
                        .collect()
                })
                .collect();
            Ok(Trial {
                id: format!("trial-{:05}", i + 1),
                recording: Recording::new(format!("s{:02}", subject + 1), prompt, channels, spec.sample_rate_hz, names.clone())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new("synthetic", trials)
}
