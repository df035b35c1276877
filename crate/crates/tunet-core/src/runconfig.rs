//! Resolved run configuration: architecture + training hyperparameters +
//! dataset paths + task selector, merged from a flat `key=value` config file
//! with command-line overrides (command line wins).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::TUnetConfig;
use crate::optim::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Detect,
    Classify,
}

impl Task {
    pub fn parse(s: &str) -> Result<Task> {
        match s {
            "detect" => Ok(Task::Detect),
            "classify" => Ok(Task::Classify),
            other => Err(Error::InvalidConfig(format!(
                "task must be `detect` or `classify`, got `{}`",
                other
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Detect => "detect",
            Task::Classify => "classify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    P32,
    P64,
}

impl Precision {
    pub fn parse(s: &str) -> Result<Precision> {
        match s {
            "32" => Ok(Precision::P32),
            "64" => Ok(Precision::P64),
            other => Err(Error::InvalidConfig(format!(
                "precision must be `32` or `64`, got `{}`",
                other
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Precision::P32 => "32",
            Precision::P64 => "64",
        }
    }
}

/// Everything a command needs, fully resolved.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub task: Task,
    pub precision: Precision,
    pub out_dir: PathBuf,
    pub manifest: Option<PathBuf>,
    /// Number of gesture classes (classification head is `cls + 1` wide).
    pub cls: usize,
    pub input_channels: usize,
    pub series_length: usize,
    pub depth: usize,
    pub base_channels: usize,
    pub conv_kernel: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_init: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub clip_norm: Option<f64>,
    /// Total series for `synth` (split 80/20 train/test).
    pub synth_series: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let net = TUnetConfig::default();
        let train = TrainConfig::default();
        Self {
            task: Task::Detect,
            precision: Precision::P32,
            out_dir: PathBuf::from("out"),
            manifest: None,
            cls: 6,
            input_channels: net.input_channels,
            series_length: net.series_length,
            depth: net.depth,
            base_channels: net.base_channels,
            conv_kernel: net.conv_kernel,
            seed: 0,
            batch_size: train.batch_size,
            epochs: train.epochs,
            lr_init: train.lr_init,
            lr_decay: train.lr_decay,
            decay_every: train.decay_every,
            clip_norm: None,
            synth_series: 80,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{}` for key `{}`", value, key)))
}

impl RunConfig {
    /// Apply one `key=value` setting.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = Task::parse(value)?,
            "precision" => self.precision = Precision::parse(value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "cls" => self.cls = parse_num(key, value)?,
            "input_channels" => self.input_channels = parse_num(key, value)?,
            "series_length" => self.series_length = parse_num(key, value)?,
            "depth" => self.depth = parse_num(key, value)?,
            "base_channels" => self.base_channels = parse_num(key, value)?,
            "conv_kernel" => self.conv_kernel = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "lr_init" => self.lr_init = parse_num(key, value)?,
            "lr_decay" => self.lr_decay = parse_num(key, value)?,
            "decay_every" => self.decay_every = parse_num(key, value)?,
            "clip_norm" => self.clip_norm = Some(parse_num(key, value)?),
            "series" => self.synth_series = parse_num(key, value)?,
            other => {
                return Err(Error::InvalidConfig(format!("unknown config key `{}`", other)))
            }
        }
        Ok(())
    }

    /// Load settings from a flat key=value file ('#' starts a comment).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {}", path.display(), e))
        })?;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{} line {}: expected key=value",
                    path.display(),
                    ln + 1
                ))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Output classes implied by the task selector.
    pub fn num_classes(&self) -> usize {
        match self.task {
            Task::Detect => 2,
            Task::Classify => self.cls + 1,
        }
    }

    pub fn net_config(&self) -> TUnetConfig {
        TUnetConfig {
            input_channels: self.input_channels,
            series_length: self.series_length,
            num_classes: self.num_classes(),
            depth: self.depth,
            base_channels: self.base_channels,
            conv_kernel: self.conv_kernel,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr_init: self.lr_init,
            lr_decay: self.lr_decay,
            decay_every: self.decay_every,
            seed: self.seed,
            clip_norm: self.clip_norm,
        }
    }

    /// Full resolved configuration as key=value lines, for run manifests.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("task={}\n", self.task.as_str()));
        s.push_str(&format!("precision={}\n", self.precision.as_str()));
        s.push_str(&format!("out={}\n", self.out_dir.display()));
        if let Some(m) = &self.manifest {
            s.push_str(&format!("manifest={}\n", m.display()));
        }
        s.push_str(&format!("cls={}\n", self.cls));
        s.push_str(&format!("input_channels={}\n", self.input_channels));
        s.push_str(&format!("series_length={}\n", self.series_length));
        s.push_str(&format!("depth={}\n", self.depth));
        s.push_str(&format!("base_channels={}\n", self.base_channels));
        s.push_str(&format!("conv_kernel={}\n", self.conv_kernel));
        s.push_str(&format!("seed={}\n", self.seed));
        s.push_str(&format!("batch_size={}\n", self.batch_size));
        s.push_str(&format!("epochs={}\n", self.epochs));
        s.push_str(&format!("lr_init={}\n", self.lr_init));
        s.push_str(&format!("lr_decay={}\n", self.lr_decay));
        s.push_str(&format!("decay_every={}\n", self.decay_every));
        if let Some(c) = self.clip_norm {
            s.push_str(&format!("clip_norm={}\n", c));
        }
        s.push_str(&format!("series={}\n", self.synth_series));
        s
    }
}
