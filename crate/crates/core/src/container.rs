//! On-disk trial container: a JSON manifest plus one binary file of
//! little-endian `f32` matrices, each trial stored channel-major.
//!
//! ```text
//! manifest.json   {"format_version":1,"dataset":..,"sample_rate_hz":..,
//!                  "channel_names":[..],"data_file":"trials.f32",
//!                  "trials":[{"trial_id","subject_id","prompt","offset","length"}]}
//! trials.f32      offset/length are byte positions into this file
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read, write_atomic};
use crate::pipeline::Trial;
use crate::signal::{Prompt, Recording};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "trials.f32";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial_id: String,
    pub subject_id: String,
    pub prompt: Prompt,
    /// Byte offset into the data file.
    pub offset: u64,
    /// Byte length: channels × samples × 4.
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub dataset: String,
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub data_file: String,
    pub trials: Vec<TrialRecord>,
}

/// A named collection of trials sharing one montage and sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub trials: Vec<Trial>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, trials: Vec<Trial>) -> Result<Self> {
        let first = trials.first().ok_or_else(|| Error::data("dataset has no trials"))?;
        let sample_rate_hz = first.recording.sample_rate_hz();
        let channel_names = first.recording.channel_names().to_vec();
        crate::pipeline::check_layout(&trials)?;
        let mut seen = HashSet::new();
        if let Some(t) = trials.iter().find(|t| !seen.insert(t.id.as_str())) {
            return Err(Error::data(format!("duplicate trial id `{}`", t.id)));
        }
        Ok(Self {
            name: name.into(),
            sample_rate_hz,
            channel_names,
            trials,
        })
    }

    /// Manifest and data bytes. Amplitudes are narrowed to `f32`.
    pub fn encode(&self) -> (Manifest, Vec<u8>) {
        let mut data = Vec::new();
        let mut records = Vec::with_capacity(self.trials.len());
        for t in &self.trials {
            let offset = data.len() as u64;
            for &v in t.recording.as_flat() {
                data.extend_from_slice(&(v as f32).to_le_bytes());
            }
            records.push(TrialRecord {
                trial_id: t.id.clone(),
                subject_id: t.recording.subject_id().to_string(),
                prompt: t.recording.prompt(),
                offset,
                length: data.len() as u64 - offset,
            });
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            dataset: self.name.clone(),
            sample_rate_hz: self.sample_rate_hz,
            channel_names: self.channel_names.clone(),
            data_file: DATA_FILE.to_string(),
            trials: records,
        };
        (manifest, data)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let (manifest, data) = self.encode();
        write_atomic(&dir.join(DATA_FILE), &data)?;
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        json.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())
    }

    pub fn decode(manifest: &Manifest, data: &[u8]) -> Result<Self> {
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::data(format!("unsupported container version {}", manifest.format_version)));
        }
        let c = manifest.channel_names.len();
        let trials = manifest
            .trials
            .iter()
            .map(|r| {
                let bad = |msg: String| Error::data(format!("trial {}: {msg}", r.trial_id));
                let end = r.offset.checked_add(r.length).filter(|&e| e <= data.len() as u64).ok_or_else(|| {
                    bad(format!(
                        "slice {}+{} exceeds data file of {} bytes",
                        r.offset,
                        r.length,
                        data.len()
                    ))
                })?;
                if c == 0 || r.length % (4 * c as u64) != 0 {
                    return Err(bad(format!("length {} is not a whole number of {c}-channel frames", r.length)));
                }
                let samples = data[r.offset as usize..end as usize]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                    .collect();
                let recording = Recording::from_flat(
                    r.subject_id.clone(),
                    r.prompt,
                    c,
                    samples,
                    manifest.sample_rate_hz,
                    manifest.channel_names.clone(),
                )
                .map_err(|e| bad(e.to_string()))?;
                Ok(Trial {
                    id: r.trial_id.clone(),
                    recording,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(manifest.dataset.clone(), trials)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = read(&path)?;
        let de = &mut serde_json::Deserializer::from_slice(&text);
        let manifest: Manifest = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::data(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?;
        if manifest.data_file.contains(['/', '\\']) || manifest.data_file.starts_with('.') {
            return Err(Error::data(format!("data file `{}` must be a plain file name", manifest.data_file)));
        }
        let data = read(&dir.join(&manifest.data_file))?;
        Self::decode(&manifest, &data)
    }
}
