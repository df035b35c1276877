//! Command-line front end: synthesize data, train, evaluate, predict, and
//! gradient-check, with reproducible seeded runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tunet_core::commands;
use tunet_core::error::Error;
use tunet_core::runconfig::{Precision, RunConfig, Task};

#[derive(Parser)]
#[command(name = "tunet", version, about = "Temporal U-Net for sample-level action recognition on WiFi CSI series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shared {
    /// Flat key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for initialization, shuffling, and synthesis.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Task selector: detect (2 classes) or classify (cls + 1 classes).
    #[arg(long)]
    task: Option<String>,
    /// Element precision: 32 or 64.
    #[arg(long)]
    precision: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic CSI corpus in the dataset format.
    Synth {
        #[command(flatten)]
        shared: Shared,
        /// Total series (split 80/20 into train/test).
        #[arg(long)]
        series: Option<usize>,
        /// Number of gesture classes.
        #[arg(long)]
        cls: Option<usize>,
        /// Samples per series.
        #[arg(long)]
        series_length: Option<usize>,
    },
    /// Train from scratch on a dataset manifest.
    Train {
        #[command(flatten)]
        shared: Shared,
        /// Dataset manifest path.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr_init: Option<f64>,
        #[arg(long)]
        lr_decay: Option<f64>,
        #[arg(long)]
        decay_every: Option<usize>,
        /// Optional global-norm gradient clip.
        #[arg(long)]
        clip_norm: Option<f64>,
        /// Gesture classes (classify task).
        #[arg(long)]
        cls: Option<usize>,
    },
    /// Evaluate a checkpoint: accuracy, confusion matrix, AP sweep.
    Eval {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate the train split instead of the test split.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        cls: Option<usize>,
    },
    /// Score one series file; writes per-sample confidence curves.
    Predict {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        checkpoint: PathBuf,
        /// One data file in the dataset format (n lines x 52 reals).
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        cls: Option<usize>,
    },
    /// Finite-difference check of every layer and the end-to-end gradient.
    Gradcheck {
        #[command(flatten)]
        shared: Shared,
    },
}

fn resolve(shared: &Shared) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &shared.config {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = shared.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &shared.out {
        cfg.out_dir = out.clone();
    }
    if let Some(task) = &shared.task {
        cfg.task = Task::parse(task)?;
    }
    if let Some(precision) = &shared.precision {
        cfg.precision = Precision::parse(precision)?;
    }
    Ok(cfg)
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Synth {
            shared,
            series,
            cls,
            series_length,
        } => {
            let mut cfg = resolve(&shared)?;
            if let Some(s) = series {
                cfg.synth_series = s;
            }
            if let Some(c) = cls {
                cfg.cls = c;
            }
            if let Some(n) = series_length {
                cfg.series_length = n;
            }
            let summary = commands::cmd_synth(&cfg)?;
            println!(
                "wrote {} train / {} test series to {}",
                summary.train_series,
                summary.test_series,
                summary.manifest_path.display()
            );
            println!(
                "matched-filter class separability: {:.3}",
                summary.separability
            );
            Ok(())
        }
        Command::Train {
            shared,
            manifest,
            epochs,
            batch_size,
            lr_init,
            lr_decay,
            decay_every,
            clip_norm,
            cls,
        } => {
            let mut cfg = resolve(&shared)?;
            if let Some(m) = manifest {
                cfg.manifest = Some(m);
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(b) = batch_size {
                cfg.batch_size = b;
            }
            if let Some(v) = lr_init {
                cfg.lr_init = v;
            }
            if let Some(v) = lr_decay {
                cfg.lr_decay = v;
            }
            if let Some(v) = decay_every {
                cfg.decay_every = v;
            }
            if let Some(v) = clip_norm {
                cfg.clip_norm = Some(v);
            }
            if let Some(c) = cls {
                cfg.cls = c;
            }
            let summary = commands::cmd_train(&cfg)?;
            println!("checkpoint: {}", summary.checkpoint_path.display());
            println!("train log: {}", summary.log_path.display());
            Ok(())
        }
        Command::Eval {
            shared,
            manifest,
            checkpoint,
            split,
            cls,
        } => {
            let mut cfg = resolve(&shared)?;
            if let Some(m) = manifest {
                cfg.manifest = Some(m);
            }
            if let Some(c) = cls {
                cfg.cls = c;
            }
            let on_train = match split.as_deref() {
                None | Some("test") => false,
                Some("train") => true,
                Some(other) => {
                    return Err(Error::InvalidConfig(format!(
                        "split must be `train` or `test`, got `{}`",
                        other
                    )))
                }
            };
            let report = commands::cmd_eval(&cfg, &checkpoint, on_train)?;
            print!("{}", report.to_text());
            print!("{}", report.to_csv_block());
            Ok(())
        }
        Command::Predict {
            shared,
            checkpoint,
            series,
            cls,
        } => {
            let mut cfg = resolve(&shared)?;
            if let Some(c) = cls {
                cfg.cls = c;
            }
            let out = commands::cmd_predict(&cfg, &checkpoint, &series)?;
            println!("confidence curves: {}", out.display());
            Ok(())
        }
        Command::Gradcheck { shared } => {
            let cfg = resolve(&shared)?;
            let report = commands::cmd_gradcheck(&cfg)?;
            print!("{}", report);
            if report.passed() {
                Ok(())
            } else {
                Err(Error::GradcheckFailed(format!(
                    "failing layers: {}",
                    report.failures().join(", ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
