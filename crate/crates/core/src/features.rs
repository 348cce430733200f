//! Covariance feature store written by the `featurize` stage: a JSON index
//! and one binary file of covariance records (see
//! [`CovMatrix::write_to`](crate::covariance::CovMatrix::write_to)).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::covariance::CovMatrix;
use crate::error::{Error, Result};
use crate::fsutil::{read, write_atomic};
use crate::pipeline::{Trial, TrialFeatures};
use crate::signal::Prompt;

pub const INDEX_FILE: &str = "features.json";
pub const DATA_FILE: &str = "features.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRecord {
    pub trial_id: String,
    pub subject_id: String,
    pub prompt: Prompt,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureIndex {
    pub config_fingerprint: String,
    pub lag: i64,
    pub channel_names: Vec<String>,
    pub records: Vec<FeatureRecord>,
}

/// Store the network-input basis matrix of every trial.
pub fn write_store(dir: &Path, trials: &[Trial], features: &[TrialFeatures], cfg: &ModelConfig) -> Result<FeatureIndex> {
    if trials.len() != features.len() {
        return Err(Error::shape("one feature set per trial is required"));
    }
    let mut data = Vec::new();
    let mut records = Vec::with_capacity(trials.len());
    for (t, f) in trials.iter().zip(features) {
        let offset = data.len() as u64;
        f.input_basis().write_to(&mut data).expect("writing to a Vec cannot fail");
        records.push(FeatureRecord {
            trial_id: t.id.clone(),
            subject_id: t.recording.subject_id().to_string(),
            prompt: t.recording.prompt(),
            offset,
            length: data.len() as u64 - offset,
        });
    }
    let index = FeatureIndex {
        config_fingerprint: cfg.fingerprint(),
        lag: cfg.covariance.lag,
        channel_names: trials.first().map(|t| t.recording.channel_names().to_vec()).unwrap_or_default(),
        records,
    };
    write_atomic(&dir.join(DATA_FILE), &data)?;
    let mut json = serde_json::to_string_pretty(&index).expect("index serialises");
    json.push('\n');
    write_atomic(&dir.join(INDEX_FILE), json.as_bytes())?;
    Ok(index)
}

pub fn read_store(dir: &Path) -> Result<(FeatureIndex, Vec<CovMatrix>)> {
    let index: FeatureIndex = serde_json::from_slice(&read(&dir.join(INDEX_FILE))?)
        .map_err(|e| Error::data(format!("feature index: {e}")))?;
    let data = read(&dir.join(DATA_FILE))?;
    let matrices = index
        .records
        .iter()
        .map(|r| {
            let end = r.offset.checked_add(r.length).filter(|&e| e <= data.len() as u64);
            let end = end.ok_or_else(|| Error::data(format!("trial {}: feature slice out of bounds", r.trial_id)))?;
            CovMatrix::read_from(&mut &data[r.offset as usize..end as usize])
                .map_err(|e| Error::data(format!("trial {}: {e}", r.trial_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((index, matrices))
}
