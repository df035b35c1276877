//! Implementations behind the CLI subcommands. Each command resolves its
//! inputs, does the work, and writes a run manifest (full config echo plus
//! input checksums) sufficient to reproduce the run.

use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::{load_checkpoint, save_checkpoint, verify_compatible};
use crate::dataset::{
    batches_in_order, detection_view, load_dataset, matched_filter_top1, normalize,
    synth_generate, write_corpus, DatasetSplit, NormStats, NUM_CARRIERS,
};
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradcheckReport};
use crate::metrics::{confusion, default_thresholds, per_series_accuracy, ApReport, EvalReport};
use crate::model::{build, predict, ParamStore, TUnetConfig};
use crate::optim::{train_epoch, AdamState, EpochReport};
use crate::runconfig::{Precision, RunConfig, Task};
use crate::tensor::{Element, Tensor3};

fn file_crc(path: &Path) -> Result<u32> {
    Ok(crc32fast::hash(&fs::read(path)?))
}

/// Combined CRC of the manifest and every file it references, in order.
pub fn corpus_crc(manifest_path: &Path) -> Result<u32> {
    let bytes = fs::read(manifest_path)?;
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&bytes);
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let text = String::from_utf8_lossy(&bytes);
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() == 4 {
            hasher.update(&fs::read(base.join(fields[2]))?);
            hasher.update(&fs::read(base.join(fields[3]))?);
        }
    }
    Ok(hasher.finalize())
}

fn write_run_manifest(cfg: &RunConfig, command: &str, extra: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    let mut text = format!("command={}\n", command);
    text.push_str(&cfg.render());
    for (k, v) in extra {
        text.push_str(&format!("{}={}\n", k, v));
    }
    fs::write(cfg.out_dir.join("run-manifest.txt"), text)?;
    Ok(())
}

/// Apply the task selector to a split's labels and validate their range.
fn task_view(split: &DatasetSplit, task: Task, cls: usize) -> Result<DatasetSplit> {
    match task {
        Task::Detect => Ok(detection_view(split)),
        Task::Classify => {
            for s in &split.series {
                if let Some(&bad) = s.labels.iter().find(|&&l| l > cls) {
                    return Err(Error::LabelOutOfRange {
                        series_id: s.series_id.clone(),
                        label: bad,
                        max: cls,
                    });
                }
            }
            Ok(split.clone())
        }
    }
}

fn check_dataset_shape(cfg: &RunConfig, split: &DatasetSplit) -> Result<()> {
    if cfg.input_channels != NUM_CARRIERS {
        return Err(Error::InvalidConfig(format!(
            "dataset carries {} carriers but input_channels is {}",
            NUM_CARRIERS, cfg.input_channels
        )));
    }
    let n = split.series_length()?;
    if n != cfg.series_length {
        return Err(Error::InvalidConfig(format!(
            "series length {} does not match configured series_length {}",
            n, cfg.series_length
        )));
    }
    Ok(())
}

pub struct SynthSummary {
    pub manifest_path: PathBuf,
    pub train_series: usize,
    pub test_series: usize,
    pub separability: f64,
}

/// Generate a synthetic corpus and write it in the dataset format.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary> {
    let (train, test) = synth_generate(cfg.synth_series, cfg.cls, cfg.series_length, cfg.seed)?;
    let manifest_path = write_corpus(&cfg.out_dir, &train, &test)?;
    let separability = matched_filter_top1(&train, cfg.cls, cfg.seed);
    let crc = corpus_crc(&manifest_path)?;
    write_run_manifest(
        cfg,
        "synth",
        &[("corpus_crc32".into(), format!("{:#010x}", crc))],
    )?;
    Ok(SynthSummary {
        manifest_path,
        train_series: train.len(),
        test_series: test.len(),
        separability,
    })
}

pub struct TrainSummary {
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub reports: Vec<EpochReport>,
}

fn train_impl<E: Element>(cfg: &RunConfig) -> Result<TrainSummary> {
    let manifest = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("train: a dataset manifest is required".into()))?;
    let (train_raw, _) = load_dataset(manifest)?;
    if train_raw.is_empty() {
        return Err(Error::Manifest("train split is empty".into()));
    }
    check_dataset_shape(cfg, &train_raw)?;
    let stats = train_raw.stats.clone();
    let train = task_view(&normalize(&train_raw)?, cfg.task, cfg.cls)?;

    let net = cfg.net_config();
    let train_cfg = cfg.train_config();
    let mut params = build::<E>(&net)?;
    let mut state = AdamState::new(&params);

    fs::create_dir_all(&cfg.out_dir)?;
    let log_path = cfg.out_dir.join("train_log.csv");
    let mut log = String::from("epoch,lr,mean_loss,train_accuracy\n");
    let mut reports = Vec::with_capacity(train_cfg.epochs);
    for epoch in 0..train_cfg.epochs {
        let report = train_epoch(&mut params, &mut state, &train, &net, &train_cfg, epoch)?;
        let line = report.csv_line();
        println!("{}", line);
        log.push_str(&line);
        log.push('\n');
        reports.push(report);
    }
    fs::write(&log_path, log)?;

    let checkpoint_path = cfg.out_dir.join("model.ckpt");
    save_checkpoint(&params, &net, stats.as_ref(), &checkpoint_path)?;

    let mut extra = vec![(
        "corpus_crc32".into(),
        format!("{:#010x}", corpus_crc(manifest)?),
    )];
    if let Some(last) = reports.last() {
        extra.push(("final_loss".into(), format!("{}", last.mean_loss)));
        extra.push(("final_accuracy".into(), format!("{}", last.accuracy)));
    }
    extra.push((
        "checkpoint_crc32".into(),
        format!("{:#010x}", file_crc(&checkpoint_path)?),
    ));
    write_run_manifest(cfg, "train", &extra)?;

    Ok(TrainSummary {
        checkpoint_path,
        log_path,
        reports,
    })
}

/// Train from scratch on the manifest's train split; writes the final
/// checkpoint, a per-epoch CSV log, and the run manifest.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    match cfg.precision {
        Precision::P32 => train_impl::<f32>(cfg),
        Precision::P64 => train_impl::<f64>(cfg),
    }
}

fn evaluate_split<E: Element>(
    params: &ParamStore<E>,
    split: &DatasetSplit,
    net: &TUnetConfig,
    batch_size: usize,
) -> Result<EvalReport> {
    let mut per_series = Vec::with_capacity(split.len());
    let mut all_preds: Vec<usize> = Vec::new();
    let mut all_truths: Vec<usize> = Vec::new();
    for batch in batches_in_order::<E>(split, batch_size) {
        let (labels, _) = predict(params, batch.x, net)?;
        for bi in 0..labels.batch() {
            let pred = labels.row(bi);
            let truth = batch.labels.row(bi);
            per_series.push(per_series_accuracy(pred, truth)?);
            all_preds.extend_from_slice(pred);
            all_truths.extend_from_slice(truth);
        }
    }
    let confusion = confusion(&all_preds, &all_truths, net.num_classes)?;
    let ap = ApReport::compute(&per_series, &default_thresholds())?;
    let mean_series_accuracy =
        per_series.iter().sum::<f64>() / per_series.len().max(1) as f64;
    Ok(EvalReport {
        overall_accuracy: confusion.overall_accuracy(),
        mean_series_accuracy,
        ap,
        confusion,
    })
}

fn eval_impl<E: Element>(cfg: &RunConfig, checkpoint: &Path, on_train: bool) -> Result<EvalReport> {
    let (params, loaded_cfg, _) = load_checkpoint::<E>(checkpoint)?;
    let net = cfg.net_config();
    verify_compatible(&loaded_cfg, &net)?;

    let manifest = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("eval: a dataset manifest is required".into()))?;
    let (train_raw, test_raw) = load_dataset(manifest)?;
    let raw = if on_train { &train_raw } else { &test_raw };
    if raw.is_empty() {
        return Err(Error::Manifest("selected eval split is empty".into()));
    }
    check_dataset_shape(cfg, raw)?;
    let split = task_view(&normalize(raw)?, cfg.task, cfg.cls)?;

    let report = evaluate_split(&params, &split, &net, cfg.batch_size)?;

    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("eval_report.csv"), report.to_csv_block())?;
    write_run_manifest(
        cfg,
        "eval",
        &[
            ("eval_split".into(), if on_train { "train" } else { "test" }.into()),
            ("checkpoint".into(), checkpoint.display().to_string()),
            (
                "checkpoint_crc32".into(),
                format!("{:#010x}", file_crc(checkpoint)?),
            ),
            (
                "corpus_crc32".into(),
                format!("{:#010x}", corpus_crc(manifest)?),
            ),
            ("overall_accuracy".into(), format!("{}", report.overall_accuracy)),
            ("mean_ap".into(), format!("{}", report.ap.mean_ap)),
        ],
    )?;
    Ok(report)
}

/// Evaluate a checkpoint on the manifest's test split (or train split when
/// `on_train` is set): overall accuracy, confusion, AP sweep, mean AP.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, on_train: bool) -> Result<EvalReport> {
    match cfg.precision {
        Precision::P32 => eval_impl::<f32>(cfg, checkpoint, on_train),
        Precision::P64 => eval_impl::<f64>(cfg, checkpoint, on_train),
    }
}

fn predict_impl<E: Element>(
    cfg: &RunConfig,
    checkpoint: &Path,
    series_path: &Path,
) -> Result<PathBuf> {
    let (params, loaded_cfg, norm) = load_checkpoint::<E>(checkpoint)?;
    let net = cfg.net_config();
    verify_compatible(&loaded_cfg, &net)?;

    let values = crate::dataset::load_series_values(series_path)?;
    let n = values.len() / NUM_CARRIERS;
    if n != net.series_length {
        return Err(Error::InvalidConfig(format!(
            "series has {} samples but the model expects {}",
            n, net.series_length
        )));
    }
    let normed = apply_norm(&values, norm.as_ref());
    let mut x = Tensor3::<E>::zeros(1, NUM_CARRIERS, n);
    for c in 0..NUM_CARRIERS {
        let row = x.row_mut(0, c);
        for (t, slot) in row.iter_mut().enumerate() {
            *slot = E::from_f64(normed[t * NUM_CARRIERS + c]);
        }
    }

    let (labels, probs) = predict(&params, x, &net)?;
    let classes = net.num_classes;
    let mut csv = String::from("sample");
    for c in 0..classes {
        csv.push_str(&format!(",class{}", c));
    }
    csv.push_str(",label\n");
    for t in 0..n {
        csv.push_str(&format!("{}", t));
        for c in 0..classes {
            csv.push_str(&format!(",{:.5e}", probs.at(0, c, t).into_f64()));
        }
        csv.push_str(&format!(",{}\n", labels.at(0, t)));
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let out_path = cfg.out_dir.join("confidences.csv");
    fs::write(&out_path, csv)?;

    write_run_manifest(
        cfg,
        "predict",
        &[
            ("checkpoint".into(), checkpoint.display().to_string()),
            (
                "checkpoint_crc32".into(),
                format!("{:#010x}", file_crc(checkpoint)?),
            ),
            ("series".into(), series_path.display().to_string()),
            (
                "series_crc32".into(),
                format!("{:#010x}", file_crc(series_path)?),
            ),
        ],
    )?;
    Ok(out_path)
}

fn apply_norm(values: &[f64], norm: Option<&NormStats>) -> Vec<f64> {
    match norm {
        None => values.to_vec(),
        Some(stats) => values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = i % NUM_CARRIERS;
                (v - stats.mean[c]) / stats.std[c]
            })
            .collect(),
    }
}

/// Score one raw series file; writes per-sample confidence curves plus the
/// argmax label column.
pub fn cmd_predict(cfg: &RunConfig, checkpoint: &Path, series_path: &Path) -> Result<PathBuf> {
    match cfg.precision {
        Precision::P32 => predict_impl::<f32>(cfg, checkpoint, series_path),
        Precision::P64 => predict_impl::<f64>(cfg, checkpoint, series_path),
    }
}

/// Run the finite-difference suite; the report prints one line per layer.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<GradcheckReport> {
    let report = gradcheck::run(&gradcheck::default_seeds(cfg.seed));
    write_run_manifest(
        cfg,
        "gradcheck",
        &[("passed".into(), format!("{}", report.passed()))],
    )?;
    Ok(report)
}
