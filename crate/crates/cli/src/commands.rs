use std::path::{Path, PathBuf};
use std::time::Instant;

use phonoeeg_core::config::{ModelConfig, RunConfig};
use phonoeeg_core::container::Dataset;
use phonoeeg_core::features::write_store;
use phonoeeg_core::fsutil::{read, write_atomic};
use phonoeeg_core::pipeline::bundle::ModelBundle;
use phonoeeg_core::pipeline::labels::TaskId;
use phonoeeg_core::pipeline::report::{write_predictions_csv, EvalReport, Prediction, Protocol};
use phonoeeg_core::pipeline::splits::{SplitMode, SplitPlan};
use phonoeeg_core::pipeline::{
    evaluate_bundle, featurize, run_task_with_labels, shuffled_labels, task_labels, TaskOutcome, Trial, TrialFeatures,
};
use phonoeeg_core::plot;
use phonoeeg_core::synth::{generate, SynthSpec};
use phonoeeg_core::Error;

use crate::{Command, Common, DataArgs, EvaluateArgs, PlotArgs, SynthArgs};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_DATA: u8 = 4;
pub const EXIT_TRAINING: u8 = 5;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config { .. } => EXIT_CONFIG,
            Error::Data(_) | Error::Io { .. } | Error::InvalidInput(_) => EXIT_DATA,
            Error::Training(_) | Error::Shape(_) => EXIT_TRAINING,
        };
        Self::new(code, e.to_string())
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Synth(args) => synth(args),
        Command::InitConfig { out } => write(&out, RunConfig::default().to_json_pretty() + "\n"),
        Command::Featurize(args) => featurize_cmd(args),
        Command::Train(args) => fit(args, None),
        Command::Crossval(args) => fit(args, Some(SplitMode::LeaveOneSubjectOut)),
        Command::Evaluate(args) => evaluate(args),
        Command::Plot(args) => plot_cmd(args),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    write_atomic(path, bytes.as_ref())?;
    Ok(())
}

fn set_threads(threads: usize) {
    // Only the first call configures the pool; later calls are no-ops.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

fn synth(a: SynthArgs) -> Outcome {
    let spec = SynthSpec {
        n_trials: a.trials,
        n_channels: a.channels,
        n_subjects: a.subjects,
        n_samples: a.samples,
        sample_rate_hz: a.sample_rate,
        separability: a.separability,
        target_task: a.target_task,
        seed: a.seed,
    };
    spec.validate().map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let ds = generate(&spec)?;
    ds.write(&a.out)?;
    log::info!("wrote {} trials to {}", ds.trials.len(), a.out.display());
    Ok(())
}

/// Config file (or defaults) with flag and environment overrides applied.
fn resolve(common: &Common) -> Outcome<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_path(path).map_err(|e| match e {
            Error::Io { .. } => Failure::new(EXIT_CONFIG, e.to_string()),
            other => other.into(),
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(tasks) = &common.tasks {
        cfg.tasks = tasks.clone();
    }
    cfg.validate()?;
    set_threads(cfg.threads);
    Ok(cfg)
}

fn load(data: &Path, cfg: &ModelConfig) -> Outcome<(Dataset, Vec<TrialFeatures>)> {
    let t0 = Instant::now();
    let ds = Dataset::read(data)?;
    log::info!("read {} trials from {}", ds.trials.len(), data.display());
    let feats = featurize(&ds.trials, cfg)?;
    log::info!("featurised in {:.1?}", t0.elapsed());
    Ok((ds, feats))
}

fn featurize_cmd(a: DataArgs) -> Outcome {
    let cfg = resolve(&a.common)?;
    let (ds, feats) = load(&a.data, &cfg.model)?;
    let out = cfg.output_dir.join("features");
    let index = write_store(&out, &ds.trials, &feats, &cfg.model)?;
    write(&cfg.output_dir.join("config.json"), cfg.to_json_pretty() + "\n")?;
    log::info!("wrote {} feature records to {}", index.records.len(), out.display());
    Ok(())
}

fn predictions_csv(predictions: &[Prediction]) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    write_predictions_csv(&mut buf, predictions)?;
    Ok(buf)
}

/// Latent codes of a fold's test trials, for the projection plot.
fn latent_csv(bundle: &mut ModelBundle, trials: &[Trial], feats: &[TrialFeatures], rows: &[Prediction]) -> Outcome<String> {
    let index = |id: &str| trials.iter().position(|t| t.id == id).expect("prediction ids come from the dataset");
    let picked: Vec<TrialFeatures> = rows.iter().map(|p| feats[index(&p.trial_id)].clone()).collect();
    let inputs = bundle.network_inputs(&picked)?;
    let z = bundle.latent(&inputs)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let dims = z.first().map_or(0, Vec::len);
    let header: Vec<String> = ["trial_id".to_string(), "truth".to_string()]
        .into_iter()
        .chain((1..=dims).map(|k| format!("z{k}")))
        .collect();
    let fail = |e: csv::Error| Failure::new(EXIT_DATA, e.to_string());
    w.write_record(&header).map_err(fail)?;
    for (p, code) in rows.iter().zip(&z) {
        let record: Vec<String> = [p.trial_id.clone(), p.truth.to_string()]
            .into_iter()
            .chain(code.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&record).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn bundle_name(task: TaskId, fold: usize, folds: usize) -> String {
    if folds == 1 {
        format!("{task}.phmb")
    } else {
        format!("{task}-fold{fold}.phmb")
    }
}

/// `train` (configured split) and `crossval` (forced leave-one-subject-out).
fn fit(a: DataArgs, forced: Option<SplitMode>) -> Outcome {
    let cfg = resolve(&a.common)?;
    let mode = forced.unwrap_or(cfg.split.mode);
    let plan = SplitPlan { mode, seed: cfg.seed };
    let (ds, feats) = load(&a.data, &cfg.model)?;
    let out = &cfg.output_dir;
    let mut task_reports = Vec::new();
    let mut predictions = Vec::new();
    for &id in &cfg.tasks {
        let task = cfg.model.labels.task(id)?;
        let t0 = Instant::now();
        log::info!("task {id}: {mode:?}");
        let mut labels = task_labels(&ds.trials, &task);
        if a.shuffle_labels {
            labels = shuffled_labels(&labels, cfg.seed);
        }
        let TaskOutcome {
            report,
            mut bundles,
            predictions: task_predictions,
        } = run_task_with_labels(&ds.trials, &feats, &labels, &task, &plan, &cfg.model)?;
        let n_folds = report.folds.len();
        for (fold, bundle) in &mut bundles {
            write(&out.join("bundles").join(bundle_name(id, *fold, n_folds)), bundle.to_bytes()?)?;
            let rows: Vec<Prediction> = task_predictions.iter().filter(|p| p.fold == *fold).cloned().collect();
            let latent = latent_csv(bundle, &ds.trials, &feats, &rows)?;
            let name = bundle_name(id, *fold, n_folds).replace(".phmb", ".csv");
            write(&out.join("latent").join(name), latent)?;
        }
        log::info!(
            "task {id}: accuracy {} in {:.1?}",
            report.accuracy.map_or("n/a".into(), |v| format!("{v:.4}")),
            t0.elapsed()
        );
        if report.folds.iter().all(|f| f.confusion.is_none()) {
            return Err(Failure::new(EXIT_TRAINING, format!("task {id}: every fold was skipped")));
        }
        task_reports.push(report);
        predictions.extend(task_predictions);
    }
    let report = EvalReport::new(mode.into(), cfg.seed, cfg.model.fingerprint(), task_reports)?;
    write(&out.join("config.json"), cfg.to_json_pretty() + "\n")?;
    write(&out.join("predictions.csv"), predictions_csv(&predictions)?)?;
    write(&out.join("report.json"), report.to_json())?;
    log::info!("wrote results to {}", out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Outcome {
    if let Some(t) = a.threads {
        set_threads(t);
    }
    let dir = a.models.join("bundles");
    let tasks: Vec<TaskId> = match a.tasks {
        Some(t) => t,
        None => TaskId::ALL.into_iter().filter(|t| dir.join(format!("{t}.phmb")).exists()).collect(),
    };
    if tasks.is_empty() {
        return Err(Failure::new(EXIT_DATA, format!("no task bundles found in {}", dir.display())));
    }
    let ds = Dataset::read(&a.data)?;
    let mut reports = Vec::new();
    let mut predictions = Vec::new();
    let mut fingerprint = String::new();
    for id in tasks {
        let path = dir.join(format!("{id}.phmb"));
        let mut bundle = ModelBundle::read_from(&mut read(&path)?.as_slice())
            .map_err(|e| Failure::from(Error::Data(format!("{}: {e}", path.display()))))?;
        let feats = featurize(&ds.trials, &bundle.config)?;
        let task = bundle.config.labels.task(id)?;
        let outcome = evaluate_bundle(&mut bundle, &ds.trials, &feats, &task)?;
        log::info!("task {id}: accuracy {:.4}", outcome.report.accuracy.unwrap_or(f64::NAN));
        fingerprint = bundle.fingerprint.clone();
        reports.push(outcome.report);
        predictions.extend(outcome.predictions);
    }
    let report = EvalReport::new(Protocol::External, 0, fingerprint, reports)?;
    write(&a.out.join("predictions.csv"), predictions_csv(&predictions)?)?;
    write(&a.out.join("report.json"), report.to_json())
}

fn plot_cmd(a: PlotArgs) -> Outcome {
    let mut reports = Vec::new();
    for spec in &a.reports {
        let (label, path) = match spec.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let label = p
                    .parent()
                    .and_then(|d| d.file_name())
                    .map_or_else(|| spec.clone(), |n| n.to_string_lossy().into_owned());
                (label, p)
            }
        };
        let text = String::from_utf8(read(&path)?).map_err(|_| Failure::new(EXIT_DATA, "report is not UTF-8"))?;
        let report = EvalReport::from_json(&text)?;
        report.check_consistency()?;
        reports.push((label, report));
    }
    write(&a.out.join("accuracy.svg"), plot::bar_chart_svg(&reports)?)?;
    write(&a.out.join("accuracy.csv"), plot::accuracy_table_csv(&reports)?)?;
    write(&a.out.join("kappa.csv"), plot::kappa_table_csv(&reports)?)?;
    if let Some(path) = &a.latent {
        let bytes = read(path)?;
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for row in r.records() {
            let row = row.map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| Failure::new(EXIT_DATA, format!("bad number `{s}`")));
            labels.push(num(&row[1])? as usize);
            points.push(row.iter().skip(2).map(num).collect::<Outcome<Vec<f64>>>()?);
        }
        let title = path.file_stem().map_or("latent".into(), |s| s.to_string_lossy().into_owned());
        write(&a.out.join("projection.svg"), plot::projection_svg(&points, &labels, &title)?)?;
    }
    Ok(())
}
