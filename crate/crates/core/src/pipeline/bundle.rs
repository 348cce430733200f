//! One deployable classifier per task: the three network levels, the
//! channel selection they were trained on, and the boosted trees.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::{fingerprint_of, ModelConfig};
use crate::covariance::{to_network_input, ChannelSelection, InputMatrix};
use crate::error::{Error, Result};
use crate::gbt::Ensemble;
use crate::networks::{extract_fused, CnnModel, DaeModel, LstmModel, FUSED_DIM, LATENT_DIM};
use crate::tensor::archive::TensorArchive;

use super::labels::TaskId;
use super::TrialFeatures;

const MAGIC: &[u8; 4] = b"PHMB";
const VERSION: u32 = 1;

/// Metadata stored as JSON at the head of a bundle file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    task: TaskId,
    /// SHA-256 of `config`.
    fingerprint: String,
    /// Serialised [`ModelConfig`], byte for byte as fingerprinted.
    config: String,
    channel_names: Vec<String>,
    channels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub task: TaskId,
    pub config: ModelConfig,
    pub fingerprint: String,
    /// Channel layout of the recordings the bundle was trained on.
    pub channel_names: Vec<String>,
    pub selection: ChannelSelection,
    pub cnn: CnnModel,
    pub lstm: LstmModel,
    pub dae: DaeModel,
    pub ensemble: Ensemble,
}

impl ModelBundle {
    pub fn input_size(&self) -> usize {
        self.config.covariance.input_size
    }

    pub fn network_inputs(&self, features: &[TrialFeatures]) -> Result<Vec<InputMatrix>> {
        features
            .iter()
            .map(|f| to_network_input(&self.selection.apply(f.input_basis())?, self.input_size()))
            .collect()
    }

    /// Fused network features → latent codes.
    pub fn latent(&mut self, inputs: &[InputMatrix]) -> Result<Vec<Vec<f64>>> {
        let fused = extract_fused(&mut self.cnn, &mut self.lstm, inputs)?;
        self.dae.encode(&fused)
    }

    /// Probability of the positive class for each trial.
    pub fn predict(&mut self, features: &[TrialFeatures]) -> Result<Vec<f64>> {
        let inputs = self.network_inputs(features)?;
        Ok(self.latent(&inputs)?.iter().map(|z| self.ensemble.predict(z)).collect())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let header = Header {
            task: self.task,
            fingerprint: self.fingerprint.clone(),
            config: self.config.to_json(),
            channel_names: self.channel_names.clone(),
            channels: self.selection.channels.clone(),
        };
        let header = serde_json::to_vec(&header).expect("header serialises");
        let mut archive = TensorArchive::new();
        self.cnn.archive_into(&mut archive)?;
        self.lstm.archive_into(&mut archive)?;
        self.dae.archive_into(&mut archive)?;
        archive.insert("selection/mean_scores", crate::tensor::Tensor::vector(self.selection.mean_scores.clone()))?;
        let archive = archive.to_bytes();
        let trees = self.ensemble.to_bytes();
        let io = |e| Error::io("<bundle>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        for block in [&header, &archive, &trees] {
            w.write_all(&(block.len() as u64).to_le_bytes()).map_err(io)?;
            w.write_all(block).map_err(io)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let truncated = |_| Error::data("truncated model bundle");
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::data("not a model bundle (bad magic)"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(truncated)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(Error::data(format!("unsupported bundle version {version}")));
        }
        let mut block = || -> Result<Vec<u8>> {
            let mut len = [0u8; 8];
            r.read_exact(&mut len).map_err(truncated)?;
            let len = u64::from_le_bytes(len);
            let mut buf = Vec::new();
            r.take(len).read_to_end(&mut buf).map_err(truncated)?;
            if buf.len() as u64 != len {
                return Err(Error::data("truncated model bundle"));
            }
            Ok(buf)
        };
        let (header, archive, trees) = (block()?, block()?, block()?);
        let header: Header =
            serde_json::from_slice(&header).map_err(|e| Error::data(format!("bundle header: {e}")))?;
        if fingerprint_of(&header.config) != header.fingerprint {
            return Err(Error::data("bundle fingerprint does not match its stored config"));
        }
        let config: ModelConfig =
            serde_json::from_str(&header.config).map_err(|e| Error::data(format!("bundle config: {e}")))?;
        config.validate()?;
        let archive = TensorArchive::read_from(&mut archive.as_slice())?;
        let ensemble = Ensemble::read_from(&mut trees.as_slice())?;
        if ensemble.n_features != LATENT_DIM {
            return Err(Error::data(format!(
                "ensemble expects {} features, latent code has {LATENT_DIM}",
                ensemble.n_features
            )));
        }
        let size = config.covariance.input_size;
        let mut cnn = CnnModel::build(size, 0)?;
        cnn.load(&archive)?;
        let mut lstm = LstmModel::build(size, config.lstm.orientation, 0)?;
        lstm.load(&archive)?;
        let mut dae = DaeModel::build(FUSED_DIM, 0)?;
        dae.load(&archive)?;
        let mean_scores = archive
            .get("selection/mean_scores")
            .ok_or_else(|| Error::data("bundle lacks channel scores"))?
            .data()
            .to_vec();
        if header.channels.is_empty()
            || header.channels.windows(2).any(|w| w[0] >= w[1])
            || header.channels.iter().any(|&c| c >= header.channel_names.len())
            || mean_scores.len() > header.channel_names.len()
        {
            return Err(Error::data("bundle channel selection is inconsistent"));
        }
        Ok(Self {
            task: header.task,
            config,
            fingerprint: header.fingerprint,
            channel_names: header.channel_names,
            selection: ChannelSelection {
                channels: header.channels,
                mean_scores,
            },
            cnn,
            lstm,
            dae,
            ensemble,
        })
    }
}
