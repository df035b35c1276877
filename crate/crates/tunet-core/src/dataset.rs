//! CSI series ingestion, label handling, normalization, batching, and a
//! synthetic corpus generator.
//!
//! On-disk format: a manifest with one `series_id,role,data_path,label_path`
//! record per line, data files of n lines x 52 comma-separated reals, label
//! files of n lines with one integer each. Paths are relative to the
//! manifest. Synthetic corpora are written in the identical format.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Element, LabelMatrix, Tensor3};

/// Number of OFDM carriers per CSI sample.
pub const NUM_CARRIERS: usize = 52;

/// Floor applied to per-carrier standard deviations before dividing.
pub const STD_FLOOR: f64 = 1e-6;

/// One recorded series: n samples x 52 carriers with one label per sample
/// (0 = non-action, 1..cls = gesture id).
#[derive(Clone, Debug, PartialEq)]
pub struct CsiSeries {
    pub series_id: String,
    /// Row-major (sample, carrier): `values[t * 52 + c]`.
    pub values: Vec<f64>,
    pub labels: Vec<usize>,
}

impl CsiSeries {
    /// Number of time samples.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn value(&self, t: usize, carrier: usize) -> f64 {
        self.values[t * NUM_CARRIERS + carrier]
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.labels.len() * NUM_CARRIERS {
            return Err(Error::SeriesFormat {
                series_id: self.series_id.clone(),
                reason: format!(
                    "{} values do not form {} samples x {} carriers",
                    self.values.len(),
                    self.labels.len(),
                    NUM_CARRIERS
                ),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SeriesFormat {
                series_id: self.series_id.clone(),
                reason: "non-finite value".into(),
            });
        }
        Ok(())
    }
}

/// Per-carrier mean and (floored) standard deviation, fit on the train split.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(series: &[CsiSeries]) -> NormStats {
        let mut mean = vec![0.0f64; NUM_CARRIERS];
        let mut count = 0usize;
        for s in series {
            for t in 0..s.len() {
                for c in 0..NUM_CARRIERS {
                    mean[c] += s.value(t, c);
                }
            }
            count += s.len();
        }
        let count = count.max(1);
        for m in mean.iter_mut() {
            *m /= count as f64;
        }
        let mut var = vec![0.0f64; NUM_CARRIERS];
        for s in series {
            for t in 0..s.len() {
                for c in 0..NUM_CARRIERS {
                    let d = s.value(t, c) - mean[c];
                    var[c] += d * d;
                }
            }
        }
        let std = var
            .iter()
            .map(|v| (v / count as f64).sqrt().max(STD_FLOOR))
            .collect();
        NormStats { mean, std }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

/// A train or test split plus the train-fit normalization statistics.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub role: Role,
    pub series: Vec<CsiSeries>,
    pub stats: Option<NormStats>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Largest label present in the split (0 when empty).
    pub fn max_label(&self) -> usize {
        self.series
            .iter()
            .flat_map(|s| s.labels.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Uniform series length of the split; error when lengths disagree.
    pub fn series_length(&self) -> Result<usize> {
        let mut len = None;
        for s in &self.series {
            match len {
                None => len = Some(s.len()),
                Some(l) if l != s.len() => {
                    return Err(Error::SeriesFormat {
                        series_id: s.series_id.clone(),
                        reason: format!("length {} differs from {} in the same split", s.len(), l),
                    })
                }
                _ => {}
            }
        }
        len.ok_or_else(|| Error::Manifest("empty split".into()))
    }
}

fn parse_series_file(
    series_id: &str,
    data_path: &Path,
    label_path: &Path,
) -> Result<CsiSeries> {
    let data_text = fs::read_to_string(data_path).map_err(|e| Error::SeriesFormat {
        series_id: series_id.to_string(),
        reason: format!("cannot read {}: {}", data_path.display(), e),
    })?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (ln, line) in data_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != NUM_CARRIERS {
            return Err(Error::SeriesFormat {
                series_id: series_id.to_string(),
                reason: format!(
                    "line {}: {} columns, expected {}",
                    ln + 1,
                    fields.len(),
                    NUM_CARRIERS
                ),
            });
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| Error::SeriesFormat {
                series_id: series_id.to_string(),
                reason: format!("line {}: bad number `{}`", ln + 1, f),
            })?;
            values.push(v);
        }
        rows += 1;
    }

    let label_text = fs::read_to_string(label_path).map_err(|e| Error::SeriesFormat {
        series_id: series_id.to_string(),
        reason: format!("cannot read {}: {}", label_path.display(), e),
    })?;
    let mut labels = Vec::new();
    for (ln, line) in label_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: usize = line.parse().map_err(|_| Error::SeriesFormat {
            series_id: series_id.to_string(),
            reason: format!("label line {}: bad integer `{}`", ln + 1, line),
        })?;
        labels.push(v);
    }
    if labels.len() != rows {
        return Err(Error::SeriesFormat {
            series_id: series_id.to_string(),
            reason: format!("{} labels for {} samples", labels.len(), rows),
        });
    }

    let series = CsiSeries {
        series_id: series_id.to_string(),
        values,
        labels,
    };
    series.validate()?;
    Ok(series)
}

/// Read one bare data file (n lines x 52 comma-separated reals) without
/// labels, as `cmd predict` consumes it. Returns row-major values.
pub fn load_series_values(path: &Path) -> Result<Vec<f64>> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let text = fs::read_to_string(path).map_err(|e| Error::SeriesFormat {
        series_id: id.clone(),
        reason: format!("cannot read {}: {}", path.display(), e),
    })?;
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != NUM_CARRIERS {
            return Err(Error::SeriesFormat {
                series_id: id.clone(),
                reason: format!(
                    "line {}: {} columns, expected {}",
                    ln + 1,
                    fields.len(),
                    NUM_CARRIERS
                ),
            });
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| Error::SeriesFormat {
                series_id: id.clone(),
                reason: format!("line {}: bad number `{}`", ln + 1, f),
            })?;
            if !v.is_finite() {
                return Err(Error::SeriesFormat {
                    series_id: id.clone(),
                    reason: format!("line {}: non-finite value", ln + 1),
                });
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::SeriesFormat {
            series_id: id,
            reason: "empty series file".into(),
        });
    }
    Ok(values)
}

/// Parse a manifest and load every referenced series. Normalization
/// statistics are fit on the train split and attached to both splits.
pub fn load_dataset(manifest_path: &Path) -> Result<(DatasetSplit, DatasetSplit)> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| Error::Manifest(format!("cannot read {}: {}", manifest_path.display(), e)))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Manifest(format!(
                "line {}: expected `series_id,role,data_path,label_path`",
                ln + 1
            )));
        }
        let (id, role, data_rel, label_rel) = (fields[0], fields[1], fields[2], fields[3]);
        let series = parse_series_file(id, &base.join(data_rel), &base.join(label_rel))?;
        match role {
            "train" => train.push(series),
            "test" => test.push(series),
            other => {
                return Err(Error::Manifest(format!(
                    "line {}: unknown role `{}`",
                    ln + 1,
                    other
                )))
            }
        }
    }

    let stats = NormStats::fit(&train);
    Ok((
        DatasetSplit {
            role: Role::Train,
            series: train,
            stats: Some(stats.clone()),
        },
        DatasetSplit {
            role: Role::Test,
            series: test,
            stats: Some(stats),
        },
    ))
}

/// z-score each carrier column with the split's attached (train) statistics.
pub fn normalize(split: &DatasetSplit) -> Result<DatasetSplit> {
    let stats = split.stats.as_ref().ok_or_else(|| {
        Error::InvalidConfig("normalize: statistics not computed for this split".into())
    })?;
    let mut out = split.clone();
    for s in out.series.iter_mut() {
        for t in 0..s.len() {
            for c in 0..NUM_CARRIERS {
                let i = t * NUM_CARRIERS + c;
                s.values[i] = (s.values[i] - stats.mean[c]) / stats.std[c];
            }
        }
    }
    Ok(out)
}

/// Collapse classification labels to detection labels: 0 stays 0, any
/// gesture becomes 1.
pub fn to_detection_labels(labels: &[usize]) -> Vec<usize> {
    labels.iter().map(|&l| if l == 0 { 0 } else { 1 }).collect()
}

/// Split with every series' labels collapsed for the detection task.
pub fn detection_view(split: &DatasetSplit) -> DatasetSplit {
    let mut out = split.clone();
    for s in out.series.iter_mut() {
        s.labels = to_detection_labels(&s.labels);
    }
    out
}

/// Synthetic-corpus shape knobs, fixed for reproducibility.
const SYNTH_NOISE_STD: f64 = 0.25;
const SYNTH_BURST_AMP: f64 = 2.0;

/// Generate a deterministic synthetic corpus of `num_series` series split
/// 80/20 into train/test.
///
/// Each series is a per-carrier baseline sinusoid plus Gaussian noise, with
/// one action interval of random start and duration in [n/8, n/2]. The
/// interval's class `g` imprints an amplitude burst whose frequency is
/// proportional to `g` through a class-specific carrier weighting; labels
/// mark the interval with `g` and are 0 elsewhere.
pub fn synth_generate(
    num_series: usize,
    cls: usize,
    n: usize,
    seed: u64,
) -> Result<(DatasetSplit, DatasetSplit)> {
    if cls == 0 {
        return Err(Error::InvalidConfig("synth: cls must be >= 1".into()));
    }
    if n < 8 {
        return Err(Error::InvalidConfig(format!(
            "synth: series length {} too short",
            n
        )));
    }
    if num_series < 2 {
        return Err(Error::InvalidConfig(
            "synth: need at least 2 series for a train/test split".into(),
        ));
    }
    let mut r = rng::seeded(seed);

    // Per-class carrier weightings, shared across the corpus.
    let class_weights: Vec<Vec<f64>> = (0..cls)
        .map(|_| (0..NUM_CARRIERS).map(|_| r.gen_range(0.3..1.0)).collect())
        .collect();
    // Per-carrier baseline sinusoid parameters.
    let base_amp: Vec<f64> = (0..NUM_CARRIERS).map(|_| r.gen_range(0.5..1.5)).collect();
    let base_freq: Vec<f64> = (0..NUM_CARRIERS).map(|_| r.gen_range(1.0..3.0)).collect();
    let base_phase: Vec<f64> = (0..NUM_CARRIERS)
        .map(|_| r.gen_range(0.0..std::f64::consts::TAU))
        .collect();

    let num_test = (num_series / 5).max(1);
    let num_train = num_series - num_test;

    let mut make_series = |id: String| -> CsiSeries {
        let g = r.gen_range(1..=cls);
        let dur = r.gen_range(n / 8..=n / 2).max(1);
        let start = r.gen_range(0..=n - dur);
        let mut values = vec![0.0f64; n * NUM_CARRIERS];
        let mut labels = vec![0usize; n];
        for l in labels.iter_mut().take(start + dur).skip(start) {
            *l = g;
        }
        for t in 0..n {
            let in_action = t >= start && t < start + dur;
            let burst_phase =
                std::f64::consts::TAU * g as f64 * (t - start.min(t)) as f64 / dur as f64;
            for c in 0..NUM_CARRIERS {
                let mut v = base_amp[c]
                    * (std::f64::consts::TAU * base_freq[c] * t as f64 / n as f64 + base_phase[c])
                        .sin();
                v += SYNTH_NOISE_STD * rng::standard_normal(&mut r);
                if in_action {
                    v += SYNTH_BURST_AMP * class_weights[g - 1][c] * burst_phase.cos();
                }
                values[t * NUM_CARRIERS + c] = v;
            }
        }
        CsiSeries {
            series_id: id,
            values,
            labels,
        }
    };

    let train_series: Vec<CsiSeries> = (0..num_train)
        .map(|i| make_series(format!("synth_train_{i:04}")))
        .collect();
    let test_series: Vec<CsiSeries> = (0..num_test)
        .map(|i| make_series(format!("synth_test_{i:04}")))
        .collect();

    let stats = NormStats::fit(&train_series);
    Ok((
        DatasetSplit {
            role: Role::Train,
            series: train_series,
            stats: Some(stats.clone()),
        },
        DatasetSplit {
            role: Role::Test,
            series: test_series,
            stats: Some(stats),
        },
    ))
}

/// Fraction of series whose action interval correlates best with its own
/// class template. A matched-filter sanity check that the synthetic classes
/// are separable before any training.
pub fn matched_filter_top1(split: &DatasetSplit, cls: usize, seed: u64) -> f64 {
    // Recover the class weightings the generator drew for this seed.
    let mut r = rng::seeded(seed);
    let class_weights: Vec<Vec<f64>> = (0..cls)
        .map(|_| (0..NUM_CARRIERS).map(|_| r.gen_range(0.3..1.0)).collect())
        .collect();

    let mut hits = 0usize;
    let mut total = 0usize;
    for s in &split.series {
        let Some(start) = s.labels.iter().position(|&l| l != 0) else {
            continue;
        };
        let truth = s.labels[start];
        let dur = s.labels[start..].iter().take_while(|&&l| l != 0).count();
        total += 1;

        // Window means per carrier, to cancel slow baselines.
        let mut mean = vec![0.0f64; NUM_CARRIERS];
        for t in start..start + dur {
            for c in 0..NUM_CARRIERS {
                mean[c] += s.value(t, c);
            }
        }
        for m in mean.iter_mut() {
            *m /= dur as f64;
        }

        let mut best_g = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for g in 1..=cls {
            let mut score = 0.0f64;
            for t in 0..dur {
                let template_t =
                    (std::f64::consts::TAU * g as f64 * t as f64 / dur as f64).cos();
                for c in 0..NUM_CARRIERS {
                    let x = s.value(start + t, c) - mean[c];
                    score += x * class_weights[g - 1][c] * template_t;
                }
            }
            if score > best_score {
                best_score = score;
                best_g = g;
            }
        }
        if best_g == truth {
            hits += 1;
        }
    }
    if total == 0 {
        return 1.0;
    }
    hits as f64 / total as f64
}

/// One packed minibatch.
#[derive(Clone, Debug)]
pub struct Batch<E> {
    /// (batch, carriers, time)
    pub x: Tensor3<E>,
    /// (batch, time)
    pub labels: LabelMatrix,
    /// Positions of the packed series within the split.
    pub indices: Vec<usize>,
}

fn pack_batch<E: Element>(split: &DatasetSplit, idx: &[usize]) -> Batch<E> {
    let n = split.series[idx[0]].len();
    let mut x = Tensor3::zeros(idx.len(), NUM_CARRIERS, n);
    let mut labels = LabelMatrix::zeros(idx.len(), n);
    for (bi, &si) in idx.iter().enumerate() {
        let s = &split.series[si];
        for c in 0..NUM_CARRIERS {
            let row = x.row_mut(bi, c);
            for (t, slot) in row.iter_mut().enumerate() {
                *slot = E::from_f64(s.value(t, c));
            }
        }
        labels.row_mut(bi).copy_from_slice(&s.labels);
    }
    Batch {
        x,
        labels,
        indices: idx.to_vec(),
    }
}

/// Seeded per-epoch shuffle, fixed-size batches, final partial batch kept.
pub fn batches<E: Element>(
    split: &DatasetSplit,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Batch<E>> {
    if split.is_empty() || batch_size == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..split.len()).collect();
    let mut r = rng::for_epoch(seed, epoch);
    // Fisher-Yates, explicit so the permutation is pinned to this crate.
    for i in (1..order.len()).rev() {
        let j = r.gen_range(0..=i);
        order.swap(i, j);
    }
    order
        .chunks(batch_size)
        .map(|idx| pack_batch(split, idx))
        .collect()
}

/// Unshuffled batches, for evaluation.
pub fn batches_in_order<E: Element>(split: &DatasetSplit, batch_size: usize) -> Vec<Batch<E>> {
    if split.is_empty() || batch_size == 0 {
        return Vec::new();
    }
    let order: Vec<usize> = (0..split.len()).collect();
    order
        .chunks(batch_size)
        .map(|idx| pack_batch(split, idx))
        .collect()
}

fn format_value(v: f64) -> String {
    // Shortest representation that round-trips; keeps regenerated corpora
    // byte-identical.
    format!("{}", v)
}

/// Write a corpus in the manifest format; returns the manifest path.
pub fn write_corpus(dir: &Path, train: &DatasetSplit, test: &DatasetSplit) -> Result<PathBuf> {
    fs::create_dir_all(dir.join("series"))?;
    fs::create_dir_all(dir.join("labels"))?;
    let mut manifest = String::new();
    for (split, role) in [(train, "train"), (test, "test")] {
        for s in &split.series {
            let data_rel = format!("series/{}.csv", s.series_id);
            let label_rel = format!("labels/{}.csv", s.series_id);
            let mut data_text = String::new();
            for t in 0..s.len() {
                let row: Vec<String> = (0..NUM_CARRIERS)
                    .map(|c| format_value(s.value(t, c)))
                    .collect();
                data_text.push_str(&row.join(","));
                data_text.push('\n');
            }
            fs::write(dir.join(&data_rel), data_text)?;
            let label_text: String = s
                .labels
                .iter()
                .map(|l| format!("{}\n", l))
                .collect();
            fs::write(dir.join(&label_rel), label_text)?;
            manifest.push_str(&format!(
                "{},{},{},{}\n",
                s.series_id, role, data_rel, label_rel
            ));
        }
    }
    let manifest_path = dir.join("manifest.csv");
    fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}
