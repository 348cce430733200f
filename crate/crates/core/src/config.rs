//! Run configuration: one JSON document covering every stage.
//!
//! Every key is required and unknown keys are rejected, so a typo fails
//! loudly with the offending key path instead of silently using a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gbt::GbtConfig;
use crate::networks::{SequenceOrientation, TrainConfig};
use crate::pipeline::labels::{LabelTable, TaskId};
use crate::pipeline::splits::SplitMode;
use crate::signal::BandpassSpec;

/// Reserved position for an upstream artifact-removal stage. Only the
/// pass-through variant exists: inputs are expected to be cleaned already.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactStage {
    #[default]
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessingConfig {
    pub artifact_removal: ArtifactStage,
    pub bandpass: BandpassSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub lag: i64,
    pub rejection_threshold: f64,
    /// Share of training trials in which a channel must pass the threshold.
    pub keep_fraction: f64,
    /// Side of the square network input.
    pub input_size: usize,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self {
            lag: 0,
            rejection_threshold: 0.3,
            keep_fraction: 0.5,
            input_size: 62,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub orientation: SequenceOrientation,
}

impl LstmConfig {
    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
        }
    }
}

impl Default for LstmConfig {
    fn default() -> Self {
        let t = TrainConfig::classifier_default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            orientation: SequenceOrientation::Rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Protocol used by `train`; `crossval` always leaves one subject out.
    pub mode: SplitMode,
}

/// Everything that influences model parameters. Its JSON form is what a
/// model bundle fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preprocessing: PreprocessingConfig,
    pub covariance: CovarianceConfig,
    pub cnn: TrainConfig,
    pub lstm: LstmConfig,
    pub dae: TrainConfig,
    pub gbt: GbtConfig,
    pub labels: LabelTable,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            preprocessing: PreprocessingConfig {
                artifact_removal: ArtifactStage::PassThrough,
                bandpass: BandpassSpec::default(),
            },
            covariance: CovarianceConfig::default(),
            cnn: TrainConfig::classifier_default(),
            lstm: LstmConfig::default(),
            dae: TrainConfig::autoencoder_default(),
            gbt: GbtConfig::default(),
            labels: LabelTable::default(),
        }
    }
}

/// Largest accepted absolute lag; beyond this a trial is mostly overlap-free.
pub const MAX_LAG: i64 = 4096;
pub const MAX_INPUT_SIZE: usize = 512;

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let b = &self.preprocessing.bandpass;
        if !(b.low_hz.is_finite() && b.low_hz >= 0.0) {
            return Err(Error::config("preprocessing.bandpass.low_hz", "must be >= 0"));
        }
        if !(b.high_hz.is_finite() && b.high_hz > b.low_hz) {
            return Err(Error::config("preprocessing.bandpass.high_hz", "must exceed low_hz"));
        }
        if b.order == 0 || b.order > crate::signal::MAX_FILTER_ORDER {
            return Err(Error::config(
                "preprocessing.bandpass.order",
                format!("must be in 1..={}", crate::signal::MAX_FILTER_ORDER),
            ));
        }
        let c = &self.covariance;
        if c.lag.abs() > MAX_LAG {
            return Err(Error::config("covariance.lag", format!("|lag| must be <= {MAX_LAG}")));
        }
        if !(c.rejection_threshold > 0.0 && c.rejection_threshold <= 1.0) {
            return Err(Error::config("covariance.rejection_threshold", "must lie in (0, 1]"));
        }
        if !(c.keep_fraction > 0.0 && c.keep_fraction <= 1.0) {
            return Err(Error::config("covariance.keep_fraction", "must lie in (0, 1]"));
        }
        // The two unpadded 3x3 convolutions need at least 5 rows.
        if !(5..=MAX_INPUT_SIZE).contains(&c.input_size) {
            return Err(Error::config("covariance.input_size", format!("must be in 5..={MAX_INPUT_SIZE}")));
        }
        for (name, t) in [("cnn", &self.cnn), ("lstm", &self.lstm.train()), ("dae", &self.dae)] {
            t.validate(name)?;
            if t.epochs == 0 {
                return Err(Error::config(format!("{name}.epochs"), "must be at least 1"));
            }
        }
        self.gbt.validate("gbt")?;
        for task in TaskId::ALL {
            if self.labels.0.contains_key(&task) {
                self.labels.task(task)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// SHA-256 of [`ModelConfig::to_json`], hex encoded.
    pub fn fingerprint(&self) -> String {
        fingerprint_of(&self.to_json())
    }
}

pub fn fingerprint_of(json: &str) -> String {
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// The deserialiser's path stops at the parent of a missing key; append the
/// key named in the message.
fn key_path(path: &str, message: &str) -> String {
    let base = if path == "." { "" } else { path };
    let named = message.strip_prefix("missing field `").and_then(|rest| rest.split('`').next());
    match named {
        Some(key) if base.is_empty() => key.to_string(),
        Some(key) => format!("{base}.{key}"),
        None if base.is_empty() => "<root>".to_string(),
        None => base.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the runtime choose.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub tasks: Vec<TaskId>,
    pub split: SplitConfig,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            output_dir: PathBuf::from("runs"),
            tasks: TaskId::ALL.to_vec(),
            split: SplitConfig {
                mode: SplitMode::RandomHoldout,
            },
            model: ModelConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().to_string();
            Error::config(key_path(&path, &message), message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::config("tasks", "at least one task is required"));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if self.tasks[..i].contains(t) {
                return Err(Error::config(format!("tasks[{i}]"), format!("duplicate task {t}")));
            }
            if !self.model.labels.0.contains_key(t) {
                return Err(Error::config(format!("model.labels.{t}"), "task has no label entry"));
            }
        }
        self.model.validate().map_err(|e| match e {
            Error::Config { path, message } => Error::config(format!("model.{path}"), message),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}
