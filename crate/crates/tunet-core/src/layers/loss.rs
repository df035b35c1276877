//! Per-sample softmax over the class axis and mean cross-entropy loss.

use crate::error::{Error, Result};
use crate::tensor::{Element, LabelMatrix, Tensor3};

/// Softmax over the channel axis at every (batch, time) sample, computed via
/// log-sum-exp so saturated logits cannot overflow.
pub fn softmax_time<E: Element>(logits: &Tensor3<E>) -> Tensor3<E> {
    let (batch, classes, length) = logits.shape();
    let mut probs = Tensor3::zeros(batch, classes, length);
    for b in 0..batch {
        for t in 0..length {
            let mut max = logits.at(b, 0, t);
            for c in 1..classes {
                let v = logits.at(b, c, t);
                if v > max {
                    max = v;
                }
            }
            let mut sum = E::zero();
            for c in 0..classes {
                sum = sum + (logits.at(b, c, t) - max).exp();
            }
            let lse = max + sum.ln();
            for c in 0..classes {
                *probs.at_mut(b, c, t) = (logits.at(b, c, t) - lse).exp();
            }
        }
    }
    probs
}

/// Mean negative log-likelihood over all (batch × time) samples, plus the
/// per-class probability curves.
pub fn softmax_xent_forward<E: Element>(
    logits: &Tensor3<E>,
    labels: &LabelMatrix,
) -> Result<(E, Tensor3<E>)> {
    let (batch, classes, length) = logits.shape();
    if labels.batch() != batch || labels.length() != length {
        return Err(Error::ShapeMismatch(format!(
            "labels ({}, {}) do not match logits {:?}",
            labels.batch(),
            labels.length(),
            logits.shape()
        )));
    }
    for b in 0..batch {
        for t in 0..length {
            let y = labels.at(b, t);
            if y >= classes {
                return Err(Error::ShapeMismatch(format!(
                    "label {} at ({}, {}) out of range for {} classes",
                    y, b, t, classes
                )));
            }
        }
    }

    let mut probs = Tensor3::zeros(batch, classes, length);
    let mut loss_acc = 0.0f64;
    for b in 0..batch {
        for t in 0..length {
            let mut max = logits.at(b, 0, t);
            for c in 1..classes {
                let v = logits.at(b, c, t);
                if v > max {
                    max = v;
                }
            }
            let mut sum = E::zero();
            for c in 0..classes {
                sum = sum + (logits.at(b, c, t) - max).exp();
            }
            let lse = max + sum.ln();
            for c in 0..classes {
                *probs.at_mut(b, c, t) = (logits.at(b, c, t) - lse).exp();
            }
            let y = labels.at(b, t);
            loss_acc += (lse - logits.at(b, y, t)).into_f64();
        }
    }
    let loss = E::from_f64(loss_acc / (batch * length) as f64);
    Ok((loss, probs))
}

/// grad(b,c,t) = (probs(b,c,t) - 1{c == labels(b,t)}) / (batch × length)
pub fn softmax_xent_backward<E: Element>(
    probs: &Tensor3<E>,
    labels: &LabelMatrix,
) -> Result<Tensor3<E>> {
    let (batch, _classes, length) = probs.shape();
    if labels.batch() != batch || labels.length() != length {
        return Err(Error::ShapeMismatch(format!(
            "labels ({}, {}) do not match probs {:?}",
            labels.batch(),
            labels.length(),
            probs.shape()
        )));
    }
    let inv = E::from_f64(1.0 / (batch * length) as f64);
    let mut grad = probs.clone();
    for b in 0..batch {
        for t in 0..length {
            let y = labels.at(b, t);
            *grad.at_mut(b, y, t) = grad.at(b, y, t) - E::one();
        }
    }
    grad.scale(inv);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rng, uniform_tensor};

    #[test]
    fn uniform_logits_give_ln2_loss() {
        let logits = Tensor3::filled(1, 2, 4, 0.7f64);
        let labels = LabelMatrix::zeros(1, 4);
        let (loss, probs) = softmax_xent_forward(&logits, &labels).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(probs.data().iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn saturated_logits_stay_finite() {
        let logits = Tensor3::from_vec(1, 2, 1, vec![1000.0f64, 0.0]).unwrap();
        let labels = LabelMatrix::zeros(1, 1);
        let (loss, probs) = softmax_xent_forward(&logits, &labels).unwrap();
        assert!(loss.is_finite());
        assert!(loss.abs() < 1e-12);
        assert!(probs.all_finite());
    }

    #[test]
    fn loss_matches_direct_evaluation() {
        let mut r = rng(3);
        let logits = uniform_tensor::<f64>(&mut r, 1, 2, 8);
        let labels = LabelMatrix::from_vec(1, 8, vec![0, 1, 1, 0, 0, 1, 0, 1]).unwrap();
        let (loss, _) = softmax_xent_forward(&logits, &labels).unwrap();

        // Direct route: explicit softmax then log, no log-sum-exp.
        let mut direct = 0.0f64;
        for t in 0..8 {
            let a = logits.at(0, 0, t);
            let b = logits.at(0, 1, t);
            let z = a.exp() + b.exp();
            let y = labels.at(0, t);
            let p = if y == 0 { a.exp() / z } else { b.exp() / z };
            direct += -p.ln();
        }
        direct /= 8.0;
        assert!((loss - direct).abs() <= 1e-12);
    }

    #[test]
    fn rejects_label_out_of_range() {
        let logits = Tensor3::<f64>::zeros(1, 2, 2);
        let labels = LabelMatrix::from_vec(1, 2, vec![0, 2]).unwrap();
        assert!(softmax_xent_forward(&logits, &labels).is_err());
    }

    #[test]
    fn backward_uniform_two_class() {
        let logits = Tensor3::from_vec(1, 2, 1, vec![0.3f64, 0.3]).unwrap();
        let labels = LabelMatrix::zeros(1, 1);
        let (_, probs) = softmax_xent_forward(&logits, &labels).unwrap();
        let grad = softmax_xent_backward(&probs, &labels).unwrap();
        assert!((grad.at(0, 0, 0) - (-0.5)).abs() < 1e-12);
        assert!((grad.at(0, 1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn backward_channel_sums_are_zero() {
        let mut r = rng(9);
        let logits = uniform_tensor::<f64>(&mut r, 2, 3, 5);
        let labels = LabelMatrix::from_vec(2, 5, vec![0, 1, 2, 0, 1, 2, 2, 1, 0, 0]).unwrap();
        let (_, probs) = softmax_xent_forward(&logits, &labels).unwrap();
        let grad = softmax_xent_backward(&probs, &labels).unwrap();
        for b in 0..2 {
            for t in 0..5 {
                let s: f64 = (0..3).map(|c| grad.at(b, c, t)).sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let mut r = rng(17);
        let logits = uniform_tensor::<f64>(&mut r, 2, 4, 6);
        let probs = softmax_time(&logits);
        for b in 0..2 {
            for t in 0..6 {
                let s: f64 = (0..4).map(|c| probs.at(b, c, t)).sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }
}
