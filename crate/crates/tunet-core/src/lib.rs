//! Temporal 1D U-Net for sample-level action recognition on WiFi CSI series.
//!
//! A self-contained implementation of an encoder-decoder temporal
//! convolutional network with skip links, labelling every time sample of a
//! channel-state-information series as non-action or as one of several
//! gesture classes. Includes hand-derived reverse-mode gradients, Adam with
//! step decay, dataset ingestion and synthesis, evaluation metrics (accuracy,
//! confusion matrices, AP@a), and checkpoint I/O.
//!
//! Entry points:
//! - [`model::build`] / [`model::forward`] / [`model::backward`] /
//!   [`model::predict`] — the network itself.
//! - [`optim::train_epoch`] — one shuffled pass of Adam updates.
//! - [`dataset`] — manifest loading, normalization, and a synthetic corpus
//!   generator for desk-scale experiments.
//! - [`metrics`] — per-series accuracy, AP@a, confusion matrices.
//! - [`gradcheck`] — finite-difference verification of every layer and the
//!   end-to-end loss gradient.
//! - The `tunet` binary wires these into `synth`, `train`, `eval`,
//!   `predict`, and `gradcheck` subcommands.

#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod runconfig;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use tensor::{Element, LabelMatrix, Tensor3};
