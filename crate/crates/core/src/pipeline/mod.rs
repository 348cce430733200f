//! End-to-end orchestration of the three-level hierarchy.
//!
//! Per fold: preprocess → channel cross-covariance → channel selection fit on
//! the training trials → fixed-size network input → CNN and LSTM (level 1) →
//! fused penultimate features → autoencoder (level 2) → latent codes →
//! boosted trees (level 3) → test-set evaluation. The development split is
//! scored for monitoring only.

pub mod bundle;
pub mod labels;
pub mod metrics;
pub mod report;
pub mod splits;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::config::ModelConfig;
use crate::covariance::{ccv_matrix, to_network_input, ChannelSelection, CovMatrix, InputMatrix};
use crate::error::{Error, Result};
use crate::gbt;
use crate::networks::{extract_fused, train_cnn, train_dae, train_lstm, EpochStats, NUM_CLASSES};
use crate::rng::substream;
use crate::signal::{preprocess, Recording};

use bundle::ModelBundle;
use labels::{derive_label, Task};
use metrics::{cohen_kappa, summarize, Confusion};
use report::{FoldReport, FoldStatus, Prediction, Protocol, TaskReport, TrainingSummary};
use splits::{make_splits, Fold, SplitPlan};

/// A recording with a stable identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: String,
    pub recording: Recording,
}

/// Covariance features of one trial. Channel selection always scores the
/// zero-lag matrix; the network input uses the configured lag.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFeatures {
    pub zero_lag: CovMatrix,
    pub lagged: Option<CovMatrix>,
}

impl TrialFeatures {
    pub fn input_basis(&self) -> &CovMatrix {
        self.lagged.as_ref().unwrap_or(&self.zero_lag)
    }
}

/// Preprocess every trial and compute its covariance features.
pub fn featurize(trials: &[Trial], cfg: &ModelConfig) -> Result<Vec<TrialFeatures>> {
    let spec = cfg.preprocessing.bandpass;
    let lag = cfg.covariance.lag;
    trials
        .par_iter()
        .map(|t| {
            let named = |e: Error| Error::data(format!("trial {}: {e}", t.id));
            let clean = preprocess(&t.recording, &spec).map_err(named)?;
            let zero_lag = ccv_matrix(&clean, 0).map_err(named)?;
            let lagged = if lag == 0 {
                None
            } else {
                Some(ccv_matrix(&clean, lag).map_err(named)?)
            };
            Ok(TrialFeatures { zero_lag, lagged })
        })
        .collect()
}

/// All trials must share one channel layout for a fixed network input.
pub fn check_layout(trials: &[Trial]) -> Result<()> {
    let first = trials.first().ok_or_else(|| Error::data("no trials"))?;
    for t in trials {
        if t.recording.channel_names() != first.recording.channel_names() {
            return Err(Error::data(format!(
                "trial {} has a different channel layout from trial {}",
                t.id, first.id
            )));
        }
        if t.recording.sample_rate_hz() != first.recording.sample_rate_hz() {
            return Err(Error::data(format!("trial {} has a different sample rate", t.id)));
        }
    }
    Ok(())
}

/// Guards every fitting call of a fold: only training indices may enter.
#[derive(Debug)]
pub struct LeakageAudit {
    held_out: BTreeSet<usize>,
    fitted: Vec<(&'static str, Vec<usize>)>,
}

impl LeakageAudit {
    pub fn new(fold: &Fold) -> Self {
        Self {
            held_out: fold.test.iter().chain(&fold.dev).copied().collect(),
            fitted: Vec::new(),
        }
    }

    /// Record that `stage` fits on `rows`, refusing any held-out index.
    pub fn admit<'a>(&mut self, stage: &'static str, rows: &'a [usize]) -> Result<&'a [usize]> {
        if let Some(i) = rows.iter().find(|i| self.held_out.contains(i)) {
            return Err(Error::Training(format!("leakage: held-out trial {i} offered to {stage}")));
        }
        self.fitted.push((stage, rows.to_vec()));
        Ok(rows)
    }

    pub fn stages(&self) -> Vec<&'static str> {
        self.fitted.iter().map(|(s, _)| *s).collect()
    }
}

/// Everything produced by one task run.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub report: TaskReport,
    /// Trained bundle per completed fold, by fold index.
    pub bundles: Vec<(usize, ModelBundle)>,
    pub predictions: Vec<Prediction>,
}

fn pick<T: Clone>(items: &[T], rows: &[usize]) -> Vec<T> {
    rows.iter().map(|&i| items[i].clone()).collect()
}

fn last_loss(trace: &[EpochStats]) -> Option<f64> {
    trace.last().map(|s| s.loss)
}

fn skip_reason(labels: &[usize], train: &[usize]) -> Option<String> {
    let mut counts = [0usize; NUM_CLASSES];
    for &i in train {
        counts[labels[i]] += 1;
    }
    match counts {
        [0, _] | [_, 0] => Some(format!("single-class training labels {counts:?}")),
        [a, b] if a < 2 || b < 2 => Some(format!("fewer than 2 training trials in a class {counts:?}")),
        _ => None,
    }
}

struct FoldRun {
    report: FoldReport,
    bundle: Option<ModelBundle>,
    predictions: Vec<Prediction>,
}

fn fold_seed(seed: u64, task: &Task, fold: &Fold) -> u64 {
    substream(seed, &format!("fold/{}/{}", task.id, fold.index)).random()
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    trials: &[Trial],
    features: &[TrialFeatures],
    labels: &[usize],
    task: &Task,
    fold: &Fold,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<FoldRun> {
    let mut report = FoldReport::new(fold);
    if let Some(reason) = skip_reason(labels, &fold.train) {
        log::warn!("task {} fold {}: skipped, {reason}", task.id, fold.index);
        report.status = FoldStatus::Skipped { reason };
        return Ok(FoldRun {
            report,
            bundle: None,
            predictions: Vec::new(),
        });
    }
    let seed = fold_seed(seed, task, fold);
    let cov = &cfg.covariance;
    let mut audit = LeakageAudit::new(fold);

    let rows = audit.admit("channel-selection", &fold.train)?;
    let basis: Vec<&CovMatrix> = rows.iter().map(|&i| &features[i].zero_lag).collect();
    let selection = ChannelSelection::fit(&basis, cov.rejection_threshold, cov.keep_fraction, cov.input_size)?;
    report.channels = selection.channels.clone();

    let input_of = |i: usize| to_network_input(&selection.apply(features[i].input_basis())?, cov.input_size);
    let inputs_for = |rows: &[usize]| rows.iter().map(|&i| input_of(i)).collect::<Result<Vec<InputMatrix>>>();

    let rows = audit.admit("cnn+lstm", &fold.train)?;
    let x_train = inputs_for(rows)?;
    let y_train = pick(labels, rows);
    log::info!("task {} fold {}: level 1 on {} trials", task.id, fold.index, rows.len());
    let lstm_cfg = cfg.lstm.train();
    let (cnn, lstm) = rayon::join(
        || train_cnn(&x_train, &y_train, &cfg.cnn, cov.input_size, seed),
        || train_lstm(&x_train, &y_train, &lstm_cfg, cov.input_size, cfg.lstm.orientation, seed),
    );
    let ((mut cnn, cnn_trace), (mut lstm, lstm_trace)) = (cnn?, lstm?);

    let rows = audit.admit("autoencoder", &fold.train)?;
    log::info!("task {} fold {}: level 2", task.id, fold.index);
    let fused_train = extract_fused(&mut cnn, &mut lstm, &inputs_for(rows)?)?;
    let (mut dae, dae_trace) = train_dae(&fused_train, &cfg.dae, seed)?;

    let rows = audit.admit("boosted-trees", &fold.train)?;
    log::info!("task {} fold {}: level 3", task.id, fold.index);
    let z_train = dae.encode(&fused_train)?;
    let y_train = pick(labels, rows);
    let ensemble = gbt::fit(&z_train, &y_train, &cfg.gbt, seed)?;

    let mut bundle = ModelBundle {
        task: task.id,
        config: cfg.clone(),
        fingerprint: cfg.fingerprint(),
        channel_names: trials[0].recording.channel_names().to_vec(),
        selection,
        cnn,
        lstm,
        dae,
        ensemble,
    };
    let mut score = |rows: &[usize]| -> Result<Vec<f64>> {
        let inputs = rows.iter().map(|&i| input_of_bundle(&bundle, features, i)).collect::<Result<Vec<_>>>()?;
        let z = bundle.latent(&inputs)?;
        Ok(z.iter().map(|r| bundle.ensemble.predict(r)).collect())
    };
    let dev_probs = score(&fold.dev)?;
    let test_probs = score(&fold.test)?;

    let classify = |p: &[f64]| p.iter().map(|&p| usize::from(p >= 0.5)).collect::<Vec<_>>();
    if !fold.dev.is_empty() {
        report.dev_accuracy = Confusion::from_pairs(&pick(labels, &fold.dev), &classify(&dev_probs))?.accuracy();
    }
    let predicted = classify(&test_probs);
    let confusion = Confusion::from_pairs(&pick(labels, &fold.test), &predicted)?;
    report.accuracy = confusion.accuracy();
    report.kappa = Some(cohen_kappa(&confusion)?);
    report.confusion = Some(confusion);
    report.training = Some(TrainingSummary {
        cnn_final_loss: last_loss(&cnn_trace),
        cnn_final_accuracy: cnn_trace.last().map(|s| s.accuracy),
        lstm_final_loss: last_loss(&lstm_trace),
        lstm_final_accuracy: lstm_trace.last().map(|s| s.accuracy),
        dae_first_loss: dae_trace.first().map(|s| s.loss),
        dae_final_loss: last_loss(&dae_trace),
        trees: bundle.ensemble.trees.len(),
        gbt_train_log_loss: gbt::log_loss(&bundle.ensemble, &z_train, &y_train),
    });
    report.fitted_stages = audit.stages().into_iter().map(String::from).collect();

    let predictions = fold
        .test
        .iter()
        .zip(predicted.iter().zip(&test_probs))
        .map(|(&i, (&prediction, &probability))| Prediction {
            trial_id: trials[i].id.clone(),
            subject: trials[i].recording.subject_id().to_string(),
            prompt: trials[i].recording.prompt(),
            task: task.id,
            fold: fold.index,
            truth: labels[i],
            prediction,
            probability,
        })
        .collect();
    log::info!(
        "task {} fold {}: test accuracy {:.4}",
        task.id,
        fold.index,
        report.accuracy.unwrap_or(f64::NAN)
    );
    Ok(FoldRun {
        report,
        bundle: Some(bundle),
        predictions,
    })
}

fn input_of_bundle(bundle: &ModelBundle, features: &[TrialFeatures], i: usize) -> Result<InputMatrix> {
    to_network_input(&bundle.selection.apply(features[i].input_basis())?, bundle.input_size())
}

/// Labels of every trial under `task`.
pub fn task_labels(trials: &[Trial], task: &Task) -> Vec<usize> {
    trials.iter().map(|t| derive_label(t.recording.prompt(), task)).collect()
}

/// Random permutation of `labels`: the null-distribution control.
pub fn shuffled_labels(labels: &[usize], seed: u64) -> Vec<usize> {
    let mut out = labels.to_vec();
    out.shuffle(&mut substream(seed, "label-shuffle"));
    out
}

/// Run every fold of `plan` for `task` with labels derived from the prompts.
pub fn run_task(
    trials: &[Trial],
    features: &[TrialFeatures],
    task: &Task,
    plan: &SplitPlan,
    cfg: &ModelConfig,
) -> Result<TaskOutcome> {
    run_task_with_labels(trials, features, &task_labels(trials, task), task, plan, cfg)
}

/// As [`run_task`] with explicit labels.
pub fn run_task_with_labels(
    trials: &[Trial],
    features: &[TrialFeatures],
    labels: &[usize],
    task: &Task,
    plan: &SplitPlan,
    cfg: &ModelConfig,
) -> Result<TaskOutcome> {
    if trials.len() != features.len() || trials.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} trials, {} feature sets, {} labels",
            trials.len(),
            features.len(),
            labels.len()
        )));
    }
    check_layout(trials)?;
    cfg.validate()?;
    let subjects: Vec<&str> = trials.iter().map(|t| t.recording.subject_id()).collect();
    let folds = make_splits(&subjects, plan)?;
    let runs: Vec<FoldRun> = folds
        .par_iter()
        .map(|fold| run_fold(trials, features, labels, task, fold, cfg, plan.seed))
        .collect::<Result<_>>()?;

    let mut pooled = Confusion::default();
    let mut fold_accuracies = Vec::new();
    let mut bundles = Vec::new();
    let mut predictions = Vec::new();
    let mut folds = Vec::new();
    for run in runs {
        if let Some(c) = &run.report.confusion {
            pooled.add(c);
        }
        fold_accuracies.extend(run.report.accuracy);
        if let Some(b) = run.bundle {
            bundles.push((run.report.index, b));
        }
        predictions.extend(run.predictions);
        folds.push(run.report);
    }
    let report = TaskReport {
        task: task.id,
        protocol: plan.mode.into(),
        n_trials: trials.len(),
        n_positive: labels.iter().filter(|&&l| l == 1).count(),
        accuracy: pooled.accuracy(),
        kappa: if pooled.total() > 0 { Some(cohen_kappa(&pooled)?) } else { None },
        confusion: pooled,
        fold_accuracy: if fold_accuracies.is_empty() { None } else { Some(summarize(&fold_accuracies)?) },
        skipped_folds: folds.iter().filter(|f| matches!(f.status, FoldStatus::Skipped { .. })).count(),
        folds,
    };
    Ok(TaskOutcome {
        report,
        bundles,
        predictions,
    })
}

/// Score trials with trained bundles, producing a report in which every
/// trial is a test trial of a single fold.
pub fn evaluate_bundle(
    bundle: &mut ModelBundle,
    trials: &[Trial],
    features: &[TrialFeatures],
    task: &Task,
) -> Result<TaskOutcome> {
    check_layout(trials)?;
    if trials[0].recording.channel_names() != bundle.channel_names.as_slice() {
        return Err(Error::data("recordings do not match the bundle's channel layout"));
    }
    let labels = task_labels(trials, task);
    let probs = bundle.predict(features)?;
    let predicted: Vec<usize> = probs.iter().map(|&p| usize::from(p >= 0.5)).collect();
    let confusion = Confusion::from_pairs(&labels, &predicted)?;
    let fold = Fold {
        index: 0,
        held_out_subject: None,
        train: Vec::new(),
        dev: Vec::new(),
        test: (0..trials.len()).collect(),
    };
    let mut fr = FoldReport::new(&fold);
    fr.channels = bundle.selection.channels.clone();
    fr.accuracy = confusion.accuracy();
    fr.kappa = Some(cohen_kappa(&confusion)?);
    fr.confusion = Some(confusion);
    let predictions = trials
        .iter()
        .enumerate()
        .map(|(i, t)| Prediction {
            trial_id: t.id.clone(),
            subject: t.recording.subject_id().to_string(),
            prompt: t.recording.prompt(),
            task: task.id,
            fold: 0,
            truth: labels[i],
            prediction: predicted[i],
            probability: probs[i],
        })
        .collect();
    let report = TaskReport {
        task: task.id,
        protocol: Protocol::External,
        n_trials: trials.len(),
        n_positive: labels.iter().filter(|&&l| l == 1).count(),
        accuracy: confusion.accuracy(),
        kappa: fr.kappa,
        confusion,
        fold_accuracy: None,
        skipped_folds: 0,
        folds: vec![fr],
    };
    Ok(TaskOutcome {
        report,
        bundles: Vec::new(),
        predictions,
    })
}
