//! Adam with bias correction, the step-decay learning-rate schedule, and the
//! per-epoch training mechanics (seeded shuffle, fixed batches, one update
//! per batch).

use crate::dataset::{batches, batches_in_order, DatasetSplit};
use crate::error::{Error, Result};
use crate::layers::{softmax_xent_backward, softmax_xent_forward};
use crate::model::{backward, forward, ParamStore, TUnetConfig};
use crate::tensor::{Element, LabelMatrix, Tensor3};

/// Per-parameter first/second moment accumulators plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState<E> {
    m: Vec<Tensor3<E>>,
    v: Vec<Tensor3<E>>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<E: Element> AdamState<E> {
    pub fn new(params: &ParamStore<E>) -> Self {
        let zeros: Vec<Tensor3<E>> = params
            .iter()
            .map(|p| {
                let (b, c, l) = p.tensor.shape();
                Tensor3::zeros(b, c, l)
            })
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_init: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub seed: u64,
    /// Optional global-norm gradient clip for divergence rescue; off by
    /// default.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 200,
            lr_init: 0.005,
            lr_decay: 0.5,
            decay_every: 10,
            seed: 0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidConfig("lr_decay must be in (0, 1]".into()));
        }
        if self.decay_every == 0 {
            return Err(Error::InvalidConfig("decay_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// lr_init * lr_decay^floor(epoch / decay_every); epochs are zero-based, so
/// the first drop lands exactly at epoch `decay_every`.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.lr_init * cfg.lr_decay.powi((epoch / cfg.decay_every) as i32)
}

/// One Adam update:
/// m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
pub fn adam_step<E: Element>(
    params: &mut ParamStore<E>,
    grads: &ParamStore<E>,
    state: &mut AdamState<E>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam_step: {} params, {} grads, {} moment arrays",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads.iter()) {
        if p.name != g.name || p.tensor.shape() != g.tensor.shape() {
            return Err(Error::ShapeMismatch(format!(
                "adam_step: parameter `{}` does not line up with gradient `{}`",
                p.name, g.name
            )));
        }
        if !g.tensor.all_finite() {
            return Err(Error::NonFiniteGradient(g.name.clone()));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let corr1 = E::from_f64(1.0 / (1.0 - state.beta1.powi(t)));
    let corr2 = E::from_f64(1.0 / (1.0 - state.beta2.powi(t)));
    let b1 = E::from_f64(state.beta1);
    let b2 = E::from_f64(state.beta2);
    let one_m_b1 = E::from_f64(1.0 - state.beta1);
    let one_m_b2 = E::from_f64(1.0 - state.beta2);
    let lr_e = E::from_f64(lr);
    let eps = E::from_f64(state.epsilon);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = p.tensor.data_mut();
        let gd = g.tensor.data();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..pd.len() {
            let gi = gd[i];
            md[i] = b1 * md[i] + one_m_b1 * gi;
            vd[i] = b2 * vd[i] + one_m_b2 * gi * gi;
            let m_hat = md[i] * corr1;
            let v_hat = vd[i] * corr2;
            pd[i] = pd[i] - lr_e * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Scale all gradients to a maximum global L2 norm.
fn clip_global_norm<E: Element>(grads: &mut ParamStore<E>, max_norm: f64) {
    let mut sq = 0.0f64;
    for g in grads.iter() {
        for &v in g.tensor.data() {
            let v = v.into_f64();
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = E::from_f64(max_norm / norm);
        for g in grads.iter_mut() {
            g.tensor.scale(scale);
        }
    }
}

/// One epoch's summary, also emitted as a CSV log line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub accuracy: f64,
}

impl EpochReport {
    /// `epoch,lr,mean_loss,train_accuracy`
    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.epoch, self.lr, self.mean_loss, self.accuracy)
    }
}

fn count_correct<E: Element>(probs: &Tensor3<E>, labels: &LabelMatrix) -> usize {
    let (batch, classes, length) = probs.shape();
    let mut correct = 0usize;
    for b in 0..batch {
        for t in 0..length {
            let mut best = probs.at(b, 0, t);
            let mut best_c = 0usize;
            for c in 1..classes {
                let v = probs.at(b, c, t);
                if v > best {
                    best = v;
                    best_c = c;
                }
            }
            if best_c == labels.at(b, t) {
                correct += 1;
            }
        }
    }
    correct
}

/// One shuffled pass over the dataset: forward, backward, and an Adam step
/// per batch at the epoch's learning rate. The final partial batch is
/// trained, not dropped. Loss and accuracy are accumulated on the forward
/// pass, before each update.
pub fn train_epoch<E: Element>(
    params: &mut ParamStore<E>,
    state: &mut AdamState<E>,
    split: &DatasetSplit,
    net: &TUnetConfig,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochReport> {
    cfg.validate()?;
    if split.is_empty() {
        return Err(Error::InvalidConfig("train_epoch: empty dataset".into()));
    }
    let lr = lr_at_epoch(cfg, epoch);
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    let mut samples = 0usize;

    for (bi, batch) in batches::<E>(split, cfg.batch_size, cfg.seed, epoch)
        .into_iter()
        .enumerate()
    {
        let batch_samples = batch.labels.batch() * batch.labels.length();
        let (logits, cache) = forward(params, batch.x, net)?;
        let (loss, probs) = softmax_xent_forward(&logits, &batch.labels)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: bi,
                reason: "non-finite loss".into(),
            });
        }
        loss_sum += loss.into_f64() * batch_samples as f64;
        correct += count_correct(&probs, &batch.labels);
        samples += batch_samples;

        let grad_logits = softmax_xent_backward(&probs, &batch.labels)?;
        let mut grads = backward(params, &cache, &grad_logits, net)?;
        if let Some(max_norm) = cfg.clip_norm {
            clip_global_norm(&mut grads, max_norm);
        }
        adam_step(params, &grads, state, lr)?;
    }

    Ok(EpochReport {
        epoch,
        lr,
        mean_loss: loss_sum / samples as f64,
        accuracy: correct as f64 / samples as f64,
    })
}

/// Mean per-sample loss and accuracy over a split without updating anything.
pub fn evaluate_loss<E: Element>(
    params: &ParamStore<E>,
    split: &DatasetSplit,
    net: &TUnetConfig,
    batch_size: usize,
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    let mut samples = 0usize;
    for batch in batches_in_order::<E>(split, batch_size) {
        let batch_samples = batch.labels.batch() * batch.labels.length();
        let (logits, _) = forward(params, batch.x, net)?;
        let (loss, probs) = softmax_xent_forward(&logits, &batch.labels)?;
        loss_sum += loss.into_f64() * batch_samples as f64;
        correct += count_correct(&probs, &batch.labels);
        samples += batch_samples;
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("evaluate_loss: empty dataset".into()));
    }
    Ok((loss_sum / samples as f64, correct as f64 / samples as f64))
}
