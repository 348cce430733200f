//! Serialisable evaluation results.
//!
//! Reports are JSON with keys in declaration order and contain nothing
//! time- or machine-dependent, so identical runs give identical bytes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Prompt;

use super::labels::TaskId;
use super::metrics::{summarize, Confusion, Kappa, Summary};
use super::splits::{Fold, SplitMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    RandomHoldout,
    LeaveOneSubjectOut,
    /// Saved bundles scored on a separate dataset.
    External,
}

impl From<SplitMode> for Protocol {
    fn from(mode: SplitMode) -> Self {
        match mode {
            SplitMode::RandomHoldout => Protocol::RandomHoldout,
            SplitMode::LeaveOneSubjectOut => Protocol::LeaveOneSubjectOut,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum FoldStatus {
    Completed,
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub cnn_final_loss: Option<f64>,
    pub cnn_final_accuracy: Option<f64>,
    pub lstm_final_loss: Option<f64>,
    pub lstm_final_accuracy: Option<f64>,
    pub dae_first_loss: Option<f64>,
    pub dae_final_loss: Option<f64>,
    pub trees: usize,
    pub gbt_train_log_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub index: usize,
    pub held_out_subject: Option<String>,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub status: FoldStatus,
    /// Original indices of the channels feeding the networks.
    pub channels: Vec<usize>,
    /// Stages that were fitted, each on training trials only.
    pub fitted_stages: Vec<String>,
    pub confusion: Option<Confusion>,
    pub accuracy: Option<f64>,
    pub kappa: Option<Kappa>,
    /// Monitoring only; never used for model selection.
    pub dev_accuracy: Option<f64>,
    pub training: Option<TrainingSummary>,
}

impl FoldReport {
    pub fn new(fold: &Fold) -> Self {
        Self {
            index: fold.index,
            held_out_subject: fold.held_out_subject.clone(),
            n_train: fold.train.len(),
            n_dev: fold.dev.len(),
            n_test: fold.test.len(),
            status: FoldStatus::Completed,
            channels: Vec::new(),
            fitted_stages: Vec::new(),
            confusion: None,
            accuracy: None,
            kappa: None,
            dev_accuracy: None,
            training: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: TaskId,
    pub protocol: Protocol,
    pub n_trials: usize,
    pub n_positive: usize,
    /// Pooled over the test sets of all completed folds.
    pub confusion: Confusion,
    pub accuracy: Option<f64>,
    pub kappa: Option<Kappa>,
    /// Spread of per-fold accuracies.
    pub fold_accuracy: Option<Summary>,
    pub skipped_folds: usize,
    pub folds: Vec<FoldReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub seed: u64,
    pub config_fingerprint: String,
    pub tasks: Vec<TaskReport>,
    /// Mean and spread of task accuracies.
    pub summary: Option<Summary>,
}

impl EvalReport {
    pub fn new(protocol: Protocol, seed: u64, config_fingerprint: String, tasks: Vec<TaskReport>) -> Result<Self> {
        let accuracies: Vec<f64> = tasks.iter().filter_map(|t| t.accuracy).collect();
        let summary = if accuracies.is_empty() { None } else { Some(summarize(&accuracies)?) };
        Ok(Self {
            protocol,
            seed,
            config_fingerprint,
            tasks,
            summary,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("report: {e}")))
    }

    /// Every stored accuracy and kappa agrees with its confusion matrix.
    pub fn check_consistency(&self) -> Result<()> {
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        for t in &self.tasks {
            let mut pooled = Confusion::default();
            for f in &t.folds {
                if let Some(c) = &f.confusion {
                    pooled.add(c);
                    if !close(f.accuracy, c.accuracy()) {
                        return Err(Error::data(format!("task {} fold {}: accuracy disagrees", t.task, f.index)));
                    }
                    let k = super::metrics::cohen_kappa(c)?;
                    if !close(f.kappa.map(|k| k.value), Some(k.value)) {
                        return Err(Error::data(format!("task {} fold {}: kappa disagrees", t.task, f.index)));
                    }
                }
            }
            if pooled != t.confusion || !close(t.accuracy, pooled.accuracy()) {
                return Err(Error::data(format!("task {}: pooled confusion disagrees", t.task)));
            }
        }
        Ok(())
    }
}

/// One test-set decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub trial_id: String,
    pub subject: String,
    pub prompt: Prompt,
    pub task: TaskId,
    pub fold: usize,
    pub truth: usize,
    pub prediction: usize,
    pub probability: f64,
}

pub fn write_predictions_csv(w: impl Write, predictions: &[Prediction]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in predictions {
        out.serialize(p).map_err(|e| Error::data(format!("predictions: {e}")))?;
    }
    out.flush().map_err(|e| Error::io("<predictions>", e))
}

pub fn read_predictions_csv(r: impl Read) -> Result<Vec<Prediction>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(|e| Error::data(format!("predictions: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prediction(truth: usize, prediction: usize) -> Prediction {
        Prediction {
            trial_id: "t,1".into(),
            subject: "s01".into(),
            prompt: Prompt::Knew,
            task: TaskId::Nasal,
            fold: 2,
            truth,
            prediction,
            probability: 0.1 + 0.8 * prediction as f64,
        }
    }

    #[test]
    fn predictions_round_trip_through_csv() {
        let rows = vec![prediction(1, 1), prediction(0, 1), prediction(0, 0)];
        let mut buf = Vec::new();
        write_predictions_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("trial_id,subject,prompt,task,fold,truth,prediction,probability\n"));
        assert_eq!(read_predictions_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn report_json_keeps_key_order_and_round_trips() {
        let fold = Fold {
            index: 0,
            held_out_subject: Some("s2".into()),
            train: vec![0, 1],
            dev: vec![],
            test: vec![2, 3],
        };
        let mut f = FoldReport::new(&fold);
        let c = Confusion { counts: [[1, 0], [1, 0]] };
        f.confusion = Some(c);
        f.accuracy = c.accuracy();
        f.kappa = Some(super::super::metrics::cohen_kappa(&c).unwrap());
        let task = TaskReport {
            task: TaskId::Uw,
            protocol: Protocol::LeaveOneSubjectOut,
            n_trials: 4,
            n_positive: 2,
            confusion: c,
            accuracy: c.accuracy(),
            kappa: f.kappa,
            fold_accuracy: Some(summarize(&[0.5]).unwrap()),
            skipped_folds: 0,
            folds: vec![f],
        };
        let report = EvalReport::new(Protocol::LeaveOneSubjectOut, 9, "ab".into(), vec![task]).unwrap();
        report.check_consistency().unwrap();
        let json = report.to_json();
        let keys = ["\"protocol\"", "\"seed\"", "\"config_fingerprint\"", "\"tasks\"", "\"summary\""];
        let positions: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(EvalReport::from_json(&json).unwrap(), report);

        let mut broken = report;
        broken.tasks[0].accuracy = Some(0.75);
        assert!(broken.check_consistency().is_err());
    }
}
