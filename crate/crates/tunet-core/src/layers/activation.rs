//! ReLU activation. The derivative at exactly zero is defined as zero.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor3};

/// Sign mask recorded at forward time.
#[derive(Clone, Debug)]
pub struct ReluCache {
    mask: Vec<bool>,
}

pub fn relu_forward<E: Element>(mut x: Tensor3<E>) -> (Tensor3<E>, ReluCache) {
    let mask: Vec<bool> = x.data().iter().map(|&v| v > E::zero()).collect();
    for v in x.data_mut() {
        if *v < E::zero() {
            *v = E::zero();
        }
    }
    (x, ReluCache { mask })
}

pub fn relu_backward<E: Element>(grad_out: &Tensor3<E>, cache: &ReluCache) -> Result<Tensor3<E>> {
    if grad_out.numel() != cache.mask.len() {
        return Err(Error::ShapeMismatch(format!(
            "relu backward: grad has {} elements, cache has {}",
            grad_out.numel(),
            cache.mask.len()
        )));
    }
    let mut gx = grad_out.clone();
    for (g, &keep) in gx.data_mut().iter_mut().zip(&cache.mask) {
        if !keep {
            *g = E::zero();
        }
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negatives_and_zero() {
        let x = Tensor3::from_vec(1, 1, 3, vec![-1.0f64, 0.0, 2.0]).unwrap();
        let (out, cache) = relu_forward(x);
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);

        let gout = Tensor3::filled(1, 1, 3, 1.0);
        let gx = relu_backward(&gout, &cache).unwrap();
        assert_eq!(gx.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let (_, cache) = relu_forward(Tensor3::<f64>::zeros(1, 1, 3));
        let gout = Tensor3::<f64>::zeros(1, 1, 4);
        assert!(relu_backward(&gout, &cache).is_err());
    }
}
